//! Explainability measures and their mapping into the maximization space.
//!
//! All measures of one query are evaluated against a [`QueryContext`], which
//! fixes the target's L-hop neighborhood and the reference prediction on it.
//! Inference never looks beyond L hops, so the neighborhood stands in for the
//! whole graph: the counterfactual graph keeps every neighborhood node and
//! drops the candidate's edges.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{predict, GnnModel, InferenceGraph, Prediction};
use crate::graph::{
    is_connected_with_anchor, neighborhood, EdgeId, Graph, Neighborhood, NodeId, Subgraph,
};

pub const DEFAULT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "fdl+")]
    FidelityPlus,
    #[serde(rename = "fdl-")]
    FidelityMinus,
    #[serde(rename = "conc")]
    Conciseness,
    #[serde(rename = "acc")]
    Accuracy,
}

impl Measure {
    pub const ALL: [Measure; 4] = [
        Measure::FidelityPlus,
        Measure::FidelityMinus,
        Measure::Conciseness,
        Measure::Accuracy,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Measure::FidelityPlus => "fdl+",
            Measure::FidelityMinus => "fdl-",
            Measure::Conciseness => "conc",
            Measure::Accuracy => "acc",
        }
    }

    /// Maps a raw value into `[floor, 1]`, larger is better.
    pub fn normalize(self, raw: f64, floor: f64) -> f64 {
        let value = match self {
            Measure::FidelityPlus => (raw + 1.0) / 2.0,
            Measure::FidelityMinus => 1.0 - (raw + 1.0) / 2.0,
            Measure::Conciseness | Measure::Accuracy => raw,
        };
        value.clamp(floor, 1.0)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.token() == s.trim())
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown measure `{s}` (expected fdl+, fdl-, conc or acc)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    measures: Vec<Measure>,
    floor: f64,
}

impl MeasureSpec {
    pub fn new(measures: Vec<Measure>, floor: f64) -> Result<Self> {
        if measures.is_empty() || measures.len() > 4 {
            return Err(Error::InvalidConfig(format!(
                "between 1 and 4 measures required, got {}",
                measures.len()
            )));
        }
        for (i, m) in measures.iter().enumerate() {
            if measures[..i].contains(m) {
                return Err(Error::InvalidConfig(format!("measure {m} listed twice")));
            }
        }
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "normalization floor {floor} outside (0, 1]"
            )));
        }
        Ok(Self { measures, floor })
    }

    /// Parses a comma-separated token list such as `fdl+,fdl-,conc`.
    pub fn parse(tokens: &str) -> Result<Self> {
        let measures = tokens
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(measures, DEFAULT_FLOOR)
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn contains(&self, m: Measure) -> bool {
        self.measures.contains(&m)
    }

    pub fn tokens(&self) -> String {
        self.measures
            .iter()
            .map(|m| m.token())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl Default for MeasureSpec {
    fn default() -> Self {
        Self {
            measures: vec![
                Measure::FidelityPlus,
                Measure::FidelityMinus,
                Measure::Conciseness,
            ],
            floor: DEFAULT_FLOOR,
        }
    }
}

/// Normalized coordinates of one candidate, one value per measure in spec order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasureVector(Vec<f64>);

impl MeasureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for MeasureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifiedKind {
    Factual,
    Counterfactual,
    Both,
}

impl VerifiedKind {
    pub fn from_flags(factual: bool, counterfactual: bool) -> Option<Self> {
        match (factual, counterfactual) {
            (true, true) => Some(VerifiedKind::Both),
            (true, false) => Some(VerifiedKind::Factual),
            (false, true) => Some(VerifiedKind::Counterfactual),
            (false, false) => None,
        }
    }

    pub fn is_factual(self) -> bool {
        matches!(self, VerifiedKind::Factual | VerifiedKind::Both)
    }

    pub fn is_counterfactual(self) -> bool {
        matches!(self, VerifiedKind::Counterfactual | VerifiedKind::Both)
    }
}

/// Outcome of verifying and measuring one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    /// `None` when the candidate is neither factual nor counterfactual.
    pub kind: Option<VerifiedKind>,
    pub raw: Vec<f64>,
    pub phi: MeasureVector,
}

/// Which edge count conciseness is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConcisenessReference {
    /// Edges of the target's L-hop neighborhood.
    #[default]
    Neighborhood,
    /// Edges of the whole input graph.
    Graph,
}

/// Everything a query's measures are evaluated against.
#[derive(Debug, Clone)]
pub struct QueryContext {
    neighborhood: Neighborhood,
    reference: Prediction,
    reference_edges: usize,
    ground_truth: Vec<NodeId>,
}

impl QueryContext {
    pub fn new(model: &GnnModel, g: &Graph, target: NodeId) -> Result<Self> {
        Self::with_reference(model, g, target, ConcisenessReference::Neighborhood)
    }

    pub fn with_reference(
        model: &GnnModel,
        g: &Graph,
        target: NodeId,
        conc: ConcisenessReference,
    ) -> Result<Self> {
        let neighborhood = neighborhood(g, target, model.num_layers())?;
        let root = InferenceGraph::from_parts(g, &neighborhood.nodes, &neighborhood.edges)?;
        let reference = predict(model, &root, target)?;
        let reference_edges = match conc {
            ConcisenessReference::Neighborhood => neighborhood.edges.len(),
            ConcisenessReference::Graph => g.edge_count(),
        };
        Ok(Self {
            neighborhood,
            reference,
            reference_edges,
            ground_truth: g.ground_truth_nodes(),
        })
    }

    pub fn target(&self) -> NodeId {
        self.neighborhood.center
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.neighborhood
    }

    /// Prediction for the target on its full L-hop neighborhood.
    pub fn reference(&self) -> &Prediction {
        &self.reference
    }

    pub fn reference_edges(&self) -> usize {
        self.reference_edges
    }

    /// Rejects edge sets that are not a connected, anchored, non-empty subset
    /// of the neighborhood.
    pub fn check_candidate(&self, g: &Graph, edges: &[EdgeId]) -> Result<()> {
        if let Some(&e) = edges
            .iter()
            .find(|e| self.neighborhood.edges.binary_search(e).is_err())
        {
            return Err(Error::InvalidSubgraph(format!(
                "edge {e} lies outside the {}-hop neighborhood of node {}",
                self.neighborhood.hops,
                self.target()
            )));
        }
        if !is_connected_with_anchor(g, edges, self.target()) {
            return Err(Error::InvalidSubgraph(format!(
                "edge set is empty, disconnected or misses node {}",
                self.target()
            )));
        }
        Ok(())
    }

    /// Prediction on the candidate itself.
    pub fn factual_prediction(
        &self,
        model: &GnnModel,
        g: &Graph,
        edges: &[EdgeId],
    ) -> Result<Prediction> {
        predict(model, &InferenceGraph::from_edges(g, edges)?, self.target())
    }

    /// Prediction on the neighborhood with the candidate's edges removed. The
    /// target stays present, possibly with only its self loop.
    pub fn counterfactual_prediction(
        &self,
        model: &GnnModel,
        g: &Graph,
        edges: &[EdgeId],
    ) -> Result<Prediction> {
        let mut removed = edges.to_vec();
        removed.sort_unstable();
        let rest: Vec<EdgeId> = self
            .neighborhood
            .edges
            .iter()
            .copied()
            .filter(|e| removed.binary_search(e).is_err())
            .collect();
        predict(
            model,
            &InferenceGraph::from_parts(g, &self.neighborhood.nodes, &rest)?,
            self.target(),
        )
    }

    /// Verifies a candidate and computes its raw and normalized measures.
    pub fn assess(
        &self,
        model: &GnnModel,
        g: &Graph,
        spec: &MeasureSpec,
        edges: &[EdgeId],
    ) -> Result<Assessment> {
        self.check_candidate(g, edges)?;
        let factual = self.factual_prediction(model, g, edges)?;
        let counterfactual = self.counterfactual_prediction(model, g, edges)?;
        let label = self.reference.label;
        let kind = VerifiedKind::from_flags(factual.label == label, counterfactual.label != label);
        let mut raw = Vec::with_capacity(spec.len());
        for &m in spec.measures() {
            raw.push(match m {
                Measure::FidelityPlus => {
                    self.reference.probability - counterfactual.probabilities[label]
                }
                Measure::FidelityMinus => self.reference.probability - factual.probabilities[label],
                Measure::Conciseness => conciseness(edges.len(), self.reference_edges)?,
                Measure::Accuracy => ground_truth_coverage(&g.nodes_of(edges), &self.ground_truth)?,
            });
        }
        let phi = spec
            .measures()
            .iter()
            .zip(&raw)
            .map(|(m, &x)| m.normalize(x, spec.floor()))
            .collect();
        Ok(Assessment {
            kind,
            raw,
            phi: MeasureVector(phi),
        })
    }
}

/// Whether the model keeps its reference label on the candidate alone.
pub fn is_factual(model: &GnnModel, g: &Graph, v: NodeId, candidate: &Subgraph) -> Result<bool> {
    let ctx = QueryContext::new(model, g, v)?;
    ctx.check_candidate(g, candidate.edges())?;
    Ok(ctx.factual_prediction(model, g, candidate.edges())?.label == ctx.reference.label)
}

/// Whether removing the candidate's edges flips the reference label.
pub fn is_counterfactual(
    model: &GnnModel,
    g: &Graph,
    v: NodeId,
    candidate: &Subgraph,
) -> Result<bool> {
    let ctx = QueryContext::new(model, g, v)?;
    ctx.check_candidate(g, candidate.edges())?;
    Ok(ctx
        .counterfactual_prediction(model, g, candidate.edges())?
        .label
        != ctx.reference.label)
}

/// Drop in the reference class probability when the candidate is removed.
pub fn fidelity_plus(model: &GnnModel, g: &Graph, v: NodeId, candidate: &Subgraph) -> Result<f64> {
    let ctx = QueryContext::new(model, g, v)?;
    ctx.check_candidate(g, candidate.edges())?;
    let cf = ctx.counterfactual_prediction(model, g, candidate.edges())?;
    Ok(ctx.reference.probability - cf.probabilities[ctx.reference.label])
}

/// Drop in the reference class probability when only the candidate is kept.
pub fn fidelity_minus(model: &GnnModel, g: &Graph, v: NodeId, candidate: &Subgraph) -> Result<f64> {
    let ctx = QueryContext::new(model, g, v)?;
    ctx.check_candidate(g, candidate.edges())?;
    let fact = ctx.factual_prediction(model, g, candidate.edges())?;
    Ok(ctx.reference.probability - fact.probabilities[ctx.reference.label])
}

pub fn conciseness(edge_count: usize, reference_edges: usize) -> Result<f64> {
    if edge_count == 0 || edge_count > reference_edges {
        return Err(Error::InvalidConfig(format!(
            "conciseness needs 1 <= edges ({edge_count}) <= reference ({reference_edges})"
        )));
    }
    Ok(1.0 - edge_count as f64 / reference_edges as f64)
}

/// Fraction of the graph's ground-truth nodes covered by the candidate.
pub fn accuracy_gt(g: &Graph, candidate: &Subgraph) -> Result<f64> {
    ground_truth_coverage(&candidate.nodes(g), &g.ground_truth_nodes())
}

fn ground_truth_coverage(nodes: &[NodeId], ground_truth: &[NodeId]) -> Result<f64> {
    if ground_truth.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let hits = ground_truth
        .iter()
        .filter(|v| nodes.binary_search(v).is_ok())
        .count();
    Ok(hits as f64 / ground_truth.len() as f64)
}

/// Normalized coordinates of a candidate under `spec`.
pub fn evaluate_phi(
    spec: &MeasureSpec,
    model: &GnnModel,
    g: &Graph,
    v: NodeId,
    candidate: &Subgraph,
) -> Result<MeasureVector> {
    let ctx = QueryContext::new(model, g, v)?;
    Ok(ctx.assess(model, g, spec, candidate.edges())?.phi)
}
