//! Candidate generation: onion peeling (remove edges from the outermost hop
//! inward) and edge growing (insert edges outward from the target).
//!
//! Both drivers spawn one candidate per editable edge per round, hand the
//! verified ones to an updater, then commit a single edit chosen by estimated
//! measure loss.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::GnnModel;
use crate::graph::{is_connected_with_anchor, EdgeId, Graph, Neighborhood, NodeId};
use crate::measures::{
    Assessment, ConcisenessReference, Measure, MeasureSpec, QueryContext, VerifiedKind,
};
use crate::skyline::{StateGraph, StateId, Transition};

pub const DEFAULT_MAX_CANDIDATES: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Strategy {
    #[default]
    #[serde(rename = "op")]
    OnionPeel,
    #[serde(rename = "insert")]
    EdgeGrow,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "op" => Ok(Strategy::OnionPeel),
            "insert" => Ok(Strategy::EdgeGrow),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy `{other}` (expected op or insert)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Remove,
    Insert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    pub target: NodeId,
    pub k: usize,
    pub epsilon: f64,
    pub spec: MeasureSpec,
    pub strategy: Strategy,
    /// Verifier invocations allowed per query.
    pub max_candidates: usize,
    pub prioritize: bool,
    /// Measures the user vouches to be monotone along a peeling path; pruning
    /// only fires when every measure in the spec is listed.
    pub monotone: Vec<Measure>,
    pub conc_reference: ConcisenessReference,
}

impl QueryConfig {
    pub fn new(target: NodeId) -> Self {
        Self {
            target,
            k: 3,
            epsilon: 0.1,
            spec: MeasureSpec::default(),
            strategy: Strategy::OnionPeel,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            prioritize: true,
            monotone: Vec::new(),
            conc_reference: ConcisenessReference::Neighborhood,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "ε = {} outside [0, 1]",
                self.epsilon
            )));
        }
        if self.max_candidates == 0 {
            return Err(Error::InvalidConfig(
                "max candidates must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn monotone_flags(&self) -> Vec<bool> {
        self.spec
            .measures()
            .iter()
            .map(|m| self.monotone.contains(m))
            .collect()
    }
}

/// Per-thread cache of edge signals used for prioritization. Entries are
/// written once and reused by every later query that meets the same edge.
#[derive(Debug, Clone, Default)]
pub struct EdgeInfoTable {
    signal: HashMap<EdgeId, f64>,
    computed: usize,
    reused: usize,
}

impl EdgeInfoTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(&mut self, edge: EdgeId, compute: impl FnOnce() -> f64) -> f64 {
        if let Some(&v) = self.signal.get(&edge) {
            self.reused += 1;
            return v;
        }
        let v = compute();
        self.computed += 1;
        self.signal.insert(edge, v);
        v
    }

    /// Number of signals computed (cache misses).
    pub fn computations(&self) -> usize {
        self.computed
    }

    pub fn reuses(&self) -> usize {
        self.reused
    }

    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }
}

/// Per-measure `(lower, upper)` bounds, `None` where no bound is known.
pub type Bounds = Vec<Option<(f64, f64)>>;

/// Verification, measurement and estimation for one query. Implemented over a
/// real model by [`ModelEvaluator`]; tests script it directly.
pub trait Evaluator {
    fn graph(&self) -> &Graph;

    /// The target's L-hop neighborhood: the root of onion peeling.
    fn neighborhood(&self) -> &Neighborhood;

    fn spec(&self) -> &MeasureSpec;

    /// Verifies a candidate and measures it.
    fn assess(&self, edges: &[EdgeId]) -> Result<Assessment>;

    /// Estimated average measure loss of applying `op` with `edge` to
    /// `current`; lower is better.
    fn edit_loss(
        &self,
        current: &[EdgeId],
        edge: EdgeId,
        op: EditOp,
        table: &mut EdgeInfoTable,
    ) -> f64;

    /// Bounds for the state `current` and for every candidate obtainable from
    /// it by further peeling.
    fn peel_bounds(&self, _current: &[EdgeId]) -> Option<(Bounds, Bounds)> {
        None
    }

    /// Embedding of a candidate, used by diversification.
    fn embedding(&self, edges: &[EdgeId]) -> Result<Vec<f64>>;
}

/// [`Evaluator`] over a GCN and its input graph.
#[derive(Debug, Clone)]
pub struct ModelEvaluator<'a> {
    g: &'a Graph,
    model: &'a GnnModel,
    spec: MeasureSpec,
    ctx: QueryContext,
}

impl<'a> ModelEvaluator<'a> {
    pub fn new(g: &'a Graph, model: &'a GnnModel, cfg: &QueryConfig) -> Result<Self> {
        if g.feature_dim() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                actual: g.feature_dim(),
                context: "graph features vs model input",
            });
        }
        let ctx = QueryContext::with_reference(model, g, cfg.target, cfg.conc_reference)?;
        if cfg.spec.contains(Measure::Accuracy) && g.ground_truth_nodes().is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        Ok(Self {
            g,
            model,
            spec: cfg.spec.clone(),
            ctx,
        })
    }

    pub fn context(&self) -> &QueryContext {
        &self.ctx
    }

    pub fn model(&self) -> &GnnModel {
        self.model
    }

    /// Message strength of an edge toward the target: its normalized adjacency
    /// weight times the mean endpoint feature norm, halved per hop of depth.
    fn edge_signal(&self, edge: EdgeId) -> f64 {
        let (a, b) = self.g.edge(edge);
        let weight = 1.0 / (((self.g.degree(a) + 1) * (self.g.degree(b) + 1)) as f64).sqrt();
        let norm = |v: NodeId| self.g.features(v).iter().map(|x| x * x).sum::<f64>().sqrt();
        let depth = self.ctx.neighborhood().layer(self.g, edge);
        weight * (norm(a) + norm(b)) / 2.0 / 2f64.powi(depth as i32 - 1)
    }

    fn ground_truth_hits(&self, edges: &[EdgeId]) -> usize {
        self.g
            .nodes_of(edges)
            .into_iter()
            .filter(|&v| self.g.is_ground_truth(v))
            .count()
    }
}

impl Evaluator for ModelEvaluator<'_> {
    fn graph(&self) -> &Graph {
        self.g
    }

    fn neighborhood(&self) -> &Neighborhood {
        self.ctx.neighborhood()
    }

    fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    fn assess(&self, edges: &[EdgeId]) -> Result<Assessment> {
        self.ctx.assess(self.model, self.g, &self.spec, edges)
    }

    fn edit_loss(
        &self,
        current: &[EdgeId],
        edge: EdgeId,
        op: EditOp,
        table: &mut EdgeInfoTable,
    ) -> f64 {
        let sign = match op {
            EditOp::Remove => 1.0,
            EditOp::Insert => -1.0,
        };
        let mut total = 0.0;
        for &m in self.spec.measures() {
            total += match m {
                Measure::FidelityPlus | Measure::FidelityMinus => {
                    sign * table.get_or_compute(edge, || self.edge_signal(edge))
                }
                Measure::Conciseness => -sign / self.ctx.reference_edges() as f64,
                Measure::Accuracy => {
                    let gt = self.g.ground_truth_nodes().len() as f64;
                    let next: Vec<EdgeId> = match op {
                        EditOp::Remove => current.iter().copied().filter(|&e| e != edge).collect(),
                        EditOp::Insert => current.iter().copied().chain([edge]).collect(),
                    };
                    (self.ground_truth_hits(current) as f64 - self.ground_truth_hits(&next) as f64)
                        / gt
                }
            };
        }
        total / self.spec.len() as f64
    }

    fn peel_bounds(&self, current: &[EdgeId]) -> Option<(Bounds, Bounds)> {
        let reference = self.ctx.reference_edges() as f64;
        let floor = self.spec.floor();
        let mut here = Vec::with_capacity(self.spec.len());
        let mut below = Vec::with_capacity(self.spec.len());
        for &m in self.spec.measures() {
            match m {
                Measure::Conciseness => {
                    let now = m.normalize(1.0 - current.len() as f64 / reference, floor);
                    here.push(Some((now, now)));
                    // peeling can shrink a candidate down to a single edge
                    below.push(Some((now, m.normalize(1.0 - 1.0 / reference, floor))));
                }
                Measure::Accuracy => {
                    let gt = self.g.ground_truth_nodes().len() as f64;
                    let now = m.normalize(self.ground_truth_hits(current) as f64 / gt, floor);
                    here.push(Some((now, now)));
                    // peeling only loses nodes
                    below.push(Some((floor, now)));
                }
                Measure::FidelityPlus | Measure::FidelityMinus => {
                    here.push(None);
                    below.push(None);
                }
            }
        }
        Some((here, below))
    }

    fn embedding(&self, edges: &[EdgeId]) -> Result<Vec<f64>> {
        crate::diversify::subgraph_embedding(self.model, self.g, edges)
    }
}

/// Edges ordered by ascending estimated loss, ties by edge id.
pub fn prioritize_edges<E: Evaluator + ?Sized>(
    eval: &E,
    current: &[EdgeId],
    edges: &[EdgeId],
    op: EditOp,
    table: &mut EdgeInfoTable,
) -> Vec<(EdgeId, f64)> {
    let mut ranked: Vec<(EdgeId, f64)> = edges
        .iter()
        .map(|&e| (e, eval.edit_loss(current, e, op, table)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Whether every candidate below state `a` is certified (1+ε)-bounded by `a`:
/// each measure must be flagged monotone and satisfy
/// `lower(a) ≥ upper(below) / (1+ε)`.
pub fn early_prune(
    a: &[Option<(f64, f64)>],
    below: &[Option<(f64, f64)>],
    monotone: &[bool],
    eps: f64,
) -> bool {
    !a.is_empty()
        && a.len() == below.len()
        && a.len() == monotone.len()
        && a.iter()
            .zip(below)
            .zip(monotone)
            .all(|((x, y), &flag)| match (x, y) {
                (Some((lower, _)), Some((_, upper))) => flag && *lower >= upper / (1.0 + eps),
                _ => false,
            })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub verifier_calls: usize,
    pub verified: usize,
    pub rounds: usize,
    pub budget_exhausted: bool,
    /// Edge set of the state whose bounds certified the rest of the run skippable.
    pub pruned_at: Option<Vec<EdgeId>>,
    pub estimator_computations: usize,
    pub estimator_reuses: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// The returned explanation of one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub members: Vec<StateId>,
    pub dominance_power: usize,
    /// Diversity score, for diversified runs.
    pub diversity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExplainOutcome {
    pub explanation: Explanation,
    pub states: StateGraph,
    pub stats: RunStats,
}

/// Receives verified candidates as they are generated.
pub trait Updater {
    fn update(
        &mut self,
        sg: &mut StateGraph,
        edges: Vec<EdgeId>,
        kind: VerifiedKind,
        assessment: Assessment,
    ) -> Result<StateId>;

    /// Ends the run early.
    fn finished(&self, _sg: &StateGraph) -> bool {
        false
    }
}

/// The dominance-power updater.
#[derive(Debug, Clone, Copy, Default)]
pub struct SkylineUpdater;

impl Updater for SkylineUpdater {
    fn update(
        &mut self,
        sg: &mut StateGraph,
        edges: Vec<EdgeId>,
        kind: VerifiedKind,
        a: Assessment,
    ) -> Result<StateId> {
        Ok(sg.update_sx(edges, kind, a.raw, a.phi))
    }
}

fn without(edges: &[EdgeId], edge: EdgeId) -> Vec<EdgeId> {
    edges.iter().copied().filter(|&e| e != edge).collect()
}

fn with(edges: &[EdgeId], edge: EdgeId) -> Vec<EdgeId> {
    let mut out = edges.to_vec();
    let at = out.binary_search(&edge).unwrap_or_else(|i| i);
    out.insert(at, edge);
    out
}

/// Onion peeling with an arbitrary updater.
pub fn onion_peel<E: Evaluator + ?Sized, U: Updater + ?Sized>(
    eval: &E,
    cfg: &QueryConfig,
    table: &mut EdgeInfoTable,
    updater: &mut U,
) -> Result<(StateGraph, RunStats)> {
    cfg.validate()?;
    let start = Instant::now();
    let (computed0, reused0) = (table.computations(), table.reuses());
    let g = eval.graph();
    let nb = eval.neighborhood();
    let anchor = nb.center;
    let monotone = cfg.monotone_flags();
    let prune = monotone.iter().any(|&f| f);
    let mut sg = StateGraph::new(cfg.k, cfg.epsilon)?;
    let mut stats = RunStats::default();
    let mut current: Vec<EdgeId> = nb.edges.clone();
    let mut current_state: Option<StateId> = None;
    let mut deferred: Vec<EdgeId> = Vec::new();

    'layers: for layer in nb.layers(g).into_iter().rev() {
        let mut pending: Vec<EdgeId> = layer.into_iter().chain(deferred.drain(..)).collect();
        pending.sort_unstable();
        loop {
            if updater.finished(&sg) {
                break 'layers;
            }
            let removable: Vec<EdgeId> = pending
                .iter()
                .copied()
                .filter(|&e| {
                    current.len() > 1 && is_connected_with_anchor(g, &without(&current, e), anchor)
                })
                .collect();
            if removable.is_empty() {
                break;
            }
            if prune {
                if let Some((here, below)) = eval.peel_bounds(&current) {
                    if early_prune(&here, &below, &monotone, cfg.epsilon) {
                        stats.pruned_at = Some(current.clone());
                        break 'layers;
                    }
                }
            }
            stats.rounds += 1;
            let mut spawned: Vec<(EdgeId, StateId)> = Vec::new();
            for &e in &removable {
                if stats.verifier_calls >= cfg.max_candidates {
                    stats.budget_exhausted = true;
                    break 'layers;
                }
                let candidate = without(&current, e);
                stats.verifier_calls += 1;
                let assessment = eval.assess(&candidate)?;
                if let Some(kind) = assessment.kind {
                    stats.verified += 1;
                    let id = updater.update(&mut sg, candidate, kind, assessment)?;
                    sg.add_transition(Transition {
                        from: current_state,
                        to: id,
                        edge: e,
                    });
                    spawned.push((e, id));
                    if updater.finished(&sg) {
                        break 'layers;
                    }
                }
            }
            let chosen = if cfg.prioritize {
                prioritize_edges(eval, &current, &removable, EditOp::Remove, table)[0].0
            } else {
                removable[0]
            };
            current = without(&current, chosen);
            pending.retain(|&e| e != chosen);
            current_state = spawned
                .iter()
                .find(|&&(e, _)| e == chosen)
                .map(|&(_, id)| id);
        }
        // edges that could not be peeled without disconnecting stay eligible
        deferred = pending;
    }
    stats.estimator_computations = table.computations() - computed0;
    stats.estimator_reuses = table.reuses() - reused0;
    stats.elapsed = start.elapsed();
    Ok((sg, stats))
}

/// Edge growing with an arbitrary updater: start from the target and insert
/// edges of the lowest incomplete layer until the full neighborhood is reached.
pub fn edge_grow<E: Evaluator + ?Sized, U: Updater + ?Sized>(
    eval: &E,
    cfg: &QueryConfig,
    table: &mut EdgeInfoTable,
    updater: &mut U,
) -> Result<(StateGraph, RunStats)> {
    cfg.validate()?;
    let start = Instant::now();
    let (computed0, reused0) = (table.computations(), table.reuses());
    let g = eval.graph();
    let nb = eval.neighborhood();
    let mut sg = StateGraph::new(cfg.k, cfg.epsilon)?;
    let mut stats = RunStats::default();
    let mut current: Vec<EdgeId> = Vec::new();
    let mut current_state: Option<StateId> = None;
    let mut reached: BTreeSet<NodeId> = BTreeSet::from([nb.center]);
    let mut remaining: Vec<Vec<EdgeId>> = nb.layers(g);
    let touches = |reached: &BTreeSet<NodeId>, e: EdgeId| {
        let (a, b) = g.edge(e);
        reached.contains(&a) || reached.contains(&b)
    };

    'grow: loop {
        if updater.finished(&sg) {
            break;
        }
        let mut frontier: Vec<EdgeId> = remaining
            .iter()
            .find(|layer| !layer.is_empty())
            .map(|layer| {
                layer
                    .iter()
                    .copied()
                    .filter(|&e| touches(&reached, e))
                    .collect()
            })
            .unwrap_or_default();
        if frontier.is_empty() {
            frontier = remaining
                .iter()
                .flatten()
                .copied()
                .filter(|&e| touches(&reached, e))
                .collect();
            frontier.sort_unstable();
        }
        if frontier.is_empty() {
            break;
        }
        stats.rounds += 1;
        let mut spawned: Vec<(EdgeId, StateId)> = Vec::new();
        for &e in &frontier {
            if stats.verifier_calls >= cfg.max_candidates {
                stats.budget_exhausted = true;
                break 'grow;
            }
            let candidate = with(&current, e);
            stats.verifier_calls += 1;
            let assessment = eval.assess(&candidate)?;
            if let Some(kind) = assessment.kind {
                stats.verified += 1;
                let id = updater.update(&mut sg, candidate, kind, assessment)?;
                sg.add_transition(Transition {
                    from: current_state,
                    to: id,
                    edge: e,
                });
                spawned.push((e, id));
                if updater.finished(&sg) {
                    break 'grow;
                }
            }
        }
        let chosen = if cfg.prioritize {
            prioritize_edges(eval, &current, &frontier, EditOp::Insert, table)[0].0
        } else {
            frontier[0]
        };
        current = with(&current, chosen);
        let (a, b) = g.edge(chosen);
        reached.insert(a);
        reached.insert(b);
        for layer in &mut remaining {
            layer.retain(|&e| e != chosen);
        }
        current_state = spawned
            .iter()
            .find(|&&(e, _)| e == chosen)
            .map(|&(_, id)| id);
    }
    stats.estimator_computations = table.computations() - computed0;
    stats.estimator_reuses = table.reuses() - reused0;
    stats.elapsed = start.elapsed();
    Ok((sg, stats))
}

fn skyline_outcome(states: StateGraph, stats: RunStats) -> ExplainOutcome {
    let members = states.explanation().to_vec();
    ExplainOutcome {
        explanation: Explanation {
            dominance_power: states.dominance_power(&members),
            members,
            diversity: None,
        },
        states,
        stats,
    }
}

/// Onion peeling with the dominance-power updater, over any evaluator.
pub fn asx_op_with<E: Evaluator + ?Sized>(
    eval: &E,
    cfg: &QueryConfig,
    table: &mut EdgeInfoTable,
) -> Result<ExplainOutcome> {
    let (states, stats) = onion_peel(eval, cfg, table, &mut SkylineUpdater)?;
    Ok(skyline_outcome(states, stats))
}

/// Edge growing with the dominance-power updater, over any evaluator.
pub fn asx_insert_with<E: Evaluator + ?Sized>(
    eval: &E,
    cfg: &QueryConfig,
    table: &mut EdgeInfoTable,
) -> Result<ExplainOutcome> {
    let (states, stats) = edge_grow(eval, cfg, table, &mut SkylineUpdater)?;
    Ok(skyline_outcome(states, stats))
}

/// Skyline explanation by onion peeling.
pub fn asx_op(g: &Graph, model: &GnnModel, cfg: &QueryConfig) -> Result<ExplainOutcome> {
    asx_op_with(
        &ModelEvaluator::new(g, model, cfg)?,
        cfg,
        &mut EdgeInfoTable::new(),
    )
}

/// Skyline explanation by edge growing.
pub fn asx_insert(g: &Graph, model: &GnnModel, cfg: &QueryConfig) -> Result<ExplainOutcome> {
    asx_insert_with(
        &ModelEvaluator::new(g, model, cfg)?,
        cfg,
        &mut EdgeInfoTable::new(),
    )
}

/// Runs the strategy selected in `cfg`.
pub fn explain_with<E: Evaluator + ?Sized>(
    eval: &E,
    cfg: &QueryConfig,
    table: &mut EdgeInfoTable,
) -> Result<ExplainOutcome> {
    match cfg.strategy {
        Strategy::OnionPeel => asx_op_with(eval, cfg, table),
        Strategy::EdgeGrow => asx_insert_with(eval, cfg, table),
    }
}

pub fn explain(g: &Graph, model: &GnnModel, cfg: &QueryConfig) -> Result<ExplainOutcome> {
    explain_with(
        &ModelEvaluator::new(g, model, cfg)?,
        cfg,
        &mut EdgeInfoTable::new(),
    )
}
