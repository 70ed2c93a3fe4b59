//! Diversified explanations: candidates are admitted by a streaming
//! threshold on their marginal gain in a diversity score that mixes node
//! coverage with pairwise embedding distance.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{
    onion_peel, EdgeInfoTable, Evaluator, ExplainOutcome, Explanation, ModelEvaluator, QueryConfig,
    Updater,
};
use crate::gnn::{forward, GnnModel, InferenceGraph};
use crate::graph::{EdgeId, Graph, NodeId};
use crate::measures::{Assessment, VerifiedKind};
use crate::skyline::{StateGraph, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityConfig {
    /// Weight of node coverage against embedding difference.
    pub alpha: f64,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

impl DiversityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "α = {} outside [0, 1]",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Mean of the final-layer embeddings of a candidate's nodes, with inference
/// run on the candidate alone.
pub fn subgraph_embedding(model: &GnnModel, g: &Graph, edges: &[EdgeId]) -> Result<Vec<f64>> {
    let out = forward(model, &InferenceGraph::from_edges(g, edges)?)?;
    let (rows, cols) = (out.embeddings.rows, out.embeddings.cols);
    let mut mean = vec![0.0; cols];
    for r in 0..rows {
        for (m, x) in mean.iter_mut().zip(out.embeddings.row(r)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= rows.max(1) as f64;
    }
    Ok(mean)
}

/// Fraction of the `universe` nodes covered by the members' node sets.
pub fn ncs(members: &[&[NodeId]], universe: usize) -> f64 {
    if universe == 0 {
        return 0.0;
    }
    let covered: BTreeSet<NodeId> = members.iter().flat_map(|m| m.iter().copied()).collect();
    covered.len() as f64 / universe as f64
}

/// Cosine distance `1 - cos(a, b)`; zero when either vector is zero.
pub fn cd(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine distance with a zero embedding; treating it as 0");
        return 0.0;
    }
    1.0 - dot / (na * nb)
}

/// `α·ncs + (1-α)·Σ cd` over unordered member pairs.
pub fn div_s(nodes: &[&[NodeId]], embeddings: &[&[f64]], universe: usize, alpha: f64) -> f64 {
    let mut spread = 0.0;
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            spread += cd(embeddings[i], embeddings[j]);
        }
    }
    alpha * ncs(nodes, universe) + (1.0 - alpha) * spread
}

/// Node sets and embeddings of the states seen by a diversified run.
#[derive(Debug, Clone, Default)]
pub struct DiversityCache {
    nodes: HashMap<StateId, Vec<NodeId>>,
    embeddings: HashMap<StateId, Vec<f64>>,
}

impl DiversityCache {
    pub fn insert(&mut self, id: StateId, nodes: Vec<NodeId>, embedding: Vec<f64>) {
        self.nodes.insert(id, nodes);
        self.embeddings.insert(id, embedding);
    }

    /// Diversity of a set of cached states.
    pub fn div_s(&self, ids: &[StateId], universe: usize, alpha: f64) -> f64 {
        let nodes: Vec<&[NodeId]> = ids.iter().map(|id| self.nodes[id].as_slice()).collect();
        let embeddings: Vec<&[f64]> = ids
            .iter()
            .map(|id| self.embeddings[id].as_slice())
            .collect();
        div_s(&nodes, &embeddings, universe, alpha)
    }
}

/// Interval DivS can take with at most `k` members: coverage is at most 1 and
/// each of the `k(k-1)/2` pairs adds at most 2. The admission threshold is
/// not scaled to it, which is what makes its target readable.
pub fn div_s_range(k: usize, alpha: f64) -> (f64, f64) {
    (
        0.0,
        alpha + (1.0 - alpha) * (k * k.saturating_sub(1)) as f64,
    )
}

/// Streaming admission threshold `((1+ε)/2 - DivS) / (k - |explanation|)`.
pub fn dsx_threshold(eps: f64, current: f64, k: usize, size: usize) -> Option<f64> {
    (size < k).then(|| ((1.0 + eps) / 2.0 - current) / (k - size) as f64)
}

/// Records a verified state and admits it when it is not weakly dominated,
/// there is room, and its marginal diversity gain clears the threshold.
/// Members it dominates are evicted only if it is admitted.
#[allow(clippy::too_many_arguments)]
pub fn update_dsx(
    sg: &mut StateGraph,
    cache: &mut DiversityCache,
    edges: Vec<EdgeId>,
    kind: VerifiedKind,
    assessment: Assessment,
    nodes: Vec<NodeId>,
    embedding: Vec<f64>,
    universe: usize,
    alpha: f64,
) -> StateId {
    let id = sg.insert(edges, kind, assessment.raw, assessment.phi);
    cache.insert(id, nodes, embedding);
    if !sg.admits(id) {
        return id;
    }
    let phi = sg.state(id).phi.clone();
    let kept: Vec<StateId> = sg
        .explanation()
        .iter()
        .copied()
        .filter(|&m| !crate::skyline::dominates(&sg.state(m).phi, &phi))
        .collect();
    let before = cache.div_s(&kept, universe, alpha);
    let Some(threshold) = dsx_threshold(sg.eps(), before, sg.k(), kept.len()) else {
        return id;
    };
    let mut with = kept;
    with.push(id);
    let gain = cache.div_s(&with, universe, alpha) - before;
    if gain >= threshold {
        sg.evict_dominated_by(id);
        sg.push_member(id);
    }
    id
}

/// The diversity updater; ends the run once the explanation holds k members.
pub struct DiversityUpdater<'e, E: Evaluator + ?Sized> {
    eval: &'e E,
    alpha: f64,
    universe: usize,
    cache: DiversityCache,
}

impl<'e, E: Evaluator + ?Sized> DiversityUpdater<'e, E> {
    pub fn new(eval: &'e E, alpha: f64) -> Self {
        Self {
            eval,
            alpha,
            universe: eval.neighborhood().nodes.len(),
            cache: DiversityCache::default(),
        }
    }

    pub fn cache(&self) -> &DiversityCache {
        &self.cache
    }
}

impl<E: Evaluator + ?Sized> Updater for DiversityUpdater<'_, E> {
    fn update(
        &mut self,
        sg: &mut StateGraph,
        edges: Vec<EdgeId>,
        kind: VerifiedKind,
        a: Assessment,
    ) -> Result<StateId> {
        let nodes = self.eval.graph().nodes_of(&edges);
        let embedding = self.eval.embedding(&edges)?;
        Ok(update_dsx(
            sg,
            &mut self.cache,
            edges,
            kind,
            a,
            nodes,
            embedding,
            self.universe,
            self.alpha,
        ))
    }

    fn finished(&self, sg: &StateGraph) -> bool {
        sg.explanation().len() >= sg.k()
    }
}

/// Diversified explanation by onion peeling, over any evaluator.
pub fn dsx_with<E: Evaluator + ?Sized>(
    eval: &E,
    cfg: &QueryConfig,
    div: &DiversityConfig,
    table: &mut EdgeInfoTable,
) -> Result<ExplainOutcome> {
    div.validate()?;
    let mut updater = DiversityUpdater::new(eval, div.alpha);
    let (states, stats) = onion_peel(eval, cfg, table, &mut updater)?;
    let members = states.explanation().to_vec();
    let diversity = updater.cache.div_s(&members, updater.universe, div.alpha);
    Ok(ExplainOutcome {
        explanation: Explanation {
            dominance_power: states.dominance_power(&members),
            members,
            diversity: Some(diversity),
        },
        states,
        stats,
    })
}

/// Diversified skyline explanation of one query.
pub fn dsx(
    g: &Graph,
    model: &GnnModel,
    cfg: &QueryConfig,
    div: &DiversityConfig,
) -> Result<ExplainOutcome> {
    dsx_with(
        &ModelEvaluator::new(g, model, cfg)?,
        cfg,
        div,
        &mut EdgeInfoTable::new(),
    )
}
