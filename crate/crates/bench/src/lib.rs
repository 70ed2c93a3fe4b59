//! Shared fixtures for the benchmarks.

use skyx_core::evalkit::{gen_tree_cycles, TreeCyclesConfig};
use skyx_core::train::initial_model;
use skyx_core::{GnnModel, Graph, QueryConfig};

/// Default Tree-Cycles graph with an untrained two-layer GCN; timings depend
/// on neighborhood sizes, not on what the model learned.
pub fn tree_cycles() -> (Graph, GnnModel) {
    let g =
        gen_tree_cycles(&TreeCyclesConfig::default()).expect("default generator config is valid");
    let model = initial_model(g.feature_dim(), &[16, 16], 2, 7).expect("layer sizes are valid");
    (g, model)
}

/// `n` queries spread evenly over the nodes.
pub fn spread_queries(g: &Graph, n: usize, max_candidates: usize) -> Vec<QueryConfig> {
    let step = (g.node_count() / n.max(1)).max(1);
    (0..n)
        .map(|i| {
            let mut q = QueryConfig::new(i * step % g.node_count());
            q.max_candidates = max_candidates;
            q
        })
        .collect()
}

/// Deterministic pseudo-random points in the unit cube, for skyline streams.
pub fn points(n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut x = 0x2545_f491_4f6c_dd1d_u64;
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    x ^= x << 13;
                    x ^= x >> 7;
                    x ^= x << 17;
                    (x >> 11) as f64 / (1u64 << 53) as f64
                })
                .collect()
        })
        .collect()
}
