//! Skyline explanations for GNN node classification.
//!
//! Given a trained GCN and a target node, the explainers search connected
//! subgraphs around the node, keep the factual or counterfactual ones, and
//! return a small set of Pareto-optimal candidates that together dominate as
//! many verified candidates as possible (or, with [`diversify`], that cover
//! the neighborhood and differ from one another).

pub mod diversify;
pub mod error;
pub mod evalkit;
pub mod explain;
pub mod export;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod measures;
pub mod parallel;
pub mod skyline;
pub mod train;

pub use diversify::{dsx, DiversityConfig};
pub use error::{Error, Result};
pub use explain::{
    asx_insert, asx_op, explain, EdgeInfoTable, Evaluator, ExplainOutcome, Explanation,
    ModelEvaluator, QueryConfig, RunStats, Strategy,
};
pub use export::{ExplanationDocument, RunMetadata};
pub use gnn::{
    forward, normalize_adjacency, predict, GnnModel, InferenceGraph, InferenceResult, Matrix,
    Prediction,
};
pub use graph::{
    is_connected_with_anchor, k_core_numbers, l_hop_subgraph, neighborhood, EdgeId, Graph,
    Neighborhood, NodeId, Subgraph,
};
pub use io::{read_graph, read_model, LoadedGraph};
pub use measures::{Assessment, Measure, MeasureSpec, MeasureVector, QueryContext, VerifiedKind};
pub use parallel::{para_sx, BatchOptions, BatchResult, LshConfig};
pub use skyline::{dominates, eps_dominates, grid_index, State, StateGraph, StateId, Transition};
pub use train::{train_gcn, TrainConfig};
