use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// A balanced binary tree with six-node cycles hanging off random tree nodes.
/// Labels: 0 tree, 1 cycle. Cycle nodes are the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeCyclesConfig {
    /// Depth of the deepest leaf; the tree has `2^(height+1) - 1` nodes.
    pub height: u32,
    pub motifs: usize,
    /// Pad with random edges up to this total edge count.
    pub target_edges: Option<usize>,
    pub seed: u64,
}

impl Default for TreeCyclesConfig {
    fn default() -> Self {
        Self {
            height: 8,
            motifs: 80,
            target_edges: None,
            seed: 0,
        }
    }
}

/// A preferential-attachment base graph with five-node houses attached by one
/// edge each. Labels: 0 base, 1 top, 2 middle, 3 bottom. House nodes are the
/// ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaShapesConfig {
    pub base_nodes: usize,
    pub motifs: usize,
    /// Edges added by each new base node.
    pub attach: usize,
    pub seed: u64,
}

impl Default for BaShapesConfig {
    fn default() -> Self {
        Self {
            base_nodes: 300,
            motifs: 80,
            attach: 5,
            seed: 0,
        }
    }
}

/// Features are `[1, degree]`: label-free, and enough to tell nodes apart
/// for a GCN without biases, which maps identical features on every node to
/// one class everywhere.
fn build(
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    labels: Vec<Option<usize>>,
    truth: Vec<NodeId>,
) -> Result<Graph> {
    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let features = degree.into_iter().map(|d| vec![1.0, d as f64]).collect();
    Graph::new(n, edges, features)?
        .with_labels(labels)?
        .with_ground_truth(truth)
}

pub fn gen_tree_cycles(cfg: &TreeCyclesConfig) -> Result<Graph> {
    if cfg.height == 0 || cfg.height > 24 {
        return Err(Error::InvalidConfig(format!(
            "tree height {} outside 1..=24",
            cfg.height
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tree = (1usize << (cfg.height + 1)) - 1;
    let n = tree + 6 * cfg.motifs;
    let mut edges: BTreeSet<(NodeId, NodeId)> =
        (1..tree).map(|child| ((child - 1) / 2, child)).collect();
    let mut labels = vec![Some(0); tree];
    let mut truth = Vec::with_capacity(6 * cfg.motifs);
    for m in 0..cfg.motifs {
        let first = tree + 6 * m;
        for i in 0..6 {
            let (a, b) = (first + i, first + (i + 1) % 6);
            edges.insert((a.min(b), a.max(b)));
            labels.push(Some(1));
            truth.push(first + i);
        }
        edges.insert((rng.gen_range(0..tree), first));
    }
    if let Some(target) = cfg.target_edges {
        let max = n * (n - 1) / 2;
        if target > max {
            return Err(Error::InvalidConfig(format!(
                "{target} edges do not fit on {n} nodes"
            )));
        }
        while edges.len() < target {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    build(n, edges.into_iter().collect(), labels, truth)
}

pub fn gen_ba_shapes(cfg: &BaShapesConfig) -> Result<Graph> {
    if cfg.attach == 0 || cfg.base_nodes < cfg.attach {
        return Err(Error::InvalidConfig(format!(
            "need base nodes ({}) >= attach ({}) >= 1",
            cfg.base_nodes, cfg.attach
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    // every endpoint occurrence, so uniform picks are degree-proportional
    let mut endpoints: Vec<NodeId> = Vec::new();
    let mut targets: Vec<NodeId> = (0..cfg.attach).collect();
    for v in cfg.attach..cfg.base_nodes {
        for &t in &targets {
            edges.insert((t.min(v), t.max(v)));
            endpoints.extend([t, v]);
        }
        let mut chosen = BTreeSet::new();
        while chosen.len() < cfg.attach {
            chosen.insert(endpoints[rng.gen_range(0..endpoints.len())]);
        }
        targets = chosen.into_iter().collect();
    }
    let n = cfg.base_nodes + 5 * cfg.motifs;
    let mut labels = vec![Some(0); cfg.base_nodes];
    let mut truth = Vec::with_capacity(5 * cfg.motifs);
    for m in 0..cfg.motifs {
        let top = cfg.base_nodes + 5 * m;
        let (m1, m2, b1, b2) = (top + 1, top + 2, top + 3, top + 4);
        for e in [(top, m1), (top, m2), (m1, m2), (m1, b1), (m2, b2), (b1, b2)] {
            edges.insert(e);
        }
        labels.extend([Some(1), Some(2), Some(2), Some(3), Some(3)]);
        truth.extend(top..top + 5);
        edges.insert((rng.gen_range(0..cfg.base_nodes), b1));
    }
    build(n, edges.into_iter().collect(), labels, truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_cycles_counts() {
        let g = gen_tree_cycles(&TreeCyclesConfig::default()).unwrap();
        assert_eq!(g.node_count(), 991);
        assert_eq!(g.edge_count(), 510 + 80 * 6 + 80);
        assert_eq!(g.ground_truth_nodes().len(), 480);
        let pure = gen_tree_cycles(&TreeCyclesConfig {
            motifs: 0,
            ..TreeCyclesConfig::default()
        })
        .unwrap();
        assert!(pure.labels().iter().all(|&l| l == Some(0)));
    }

    #[test]
    fn tree_cycles_noise_hits_target() {
        let g = gen_tree_cycles(&TreeCyclesConfig {
            target_edges: Some(2140),
            ..TreeCyclesConfig::default()
        })
        .unwrap();
        assert_eq!(g.edge_count(), 2140);
        assert_eq!(g.ground_truth_nodes().len(), 480);
    }

    #[test]
    fn ba_shapes_counts() {
        let g = gen_ba_shapes(&BaShapesConfig::default()).unwrap();
        assert_eq!(g.node_count(), 700);
        // each house: 6 internal edges, 1 attachment
        for m in 0..80 {
            let top = 300 + 5 * m;
            let internal = g
                .edges()
                .iter()
                .filter(|&&(a, b)| (top..top + 5).contains(&a) && (top..top + 5).contains(&b))
                .count();
            let attach = g
                .edges()
                .iter()
                .filter(|&&(a, b)| a < 300 && (top..top + 5).contains(&b))
                .count();
            assert_eq!((internal, attach), (6, 1));
        }
        let plain = gen_ba_shapes(&BaShapesConfig {
            motifs: 0,
            ..BaShapesConfig::default()
        })
        .unwrap();
        assert!(plain.labels().iter().all(|&l| l == Some(0)));
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let cfg = TreeCyclesConfig {
            seed: 7,
            ..TreeCyclesConfig::default()
        };
        assert_eq!(
            gen_tree_cycles(&cfg).unwrap(),
            gen_tree_cycles(&cfg).unwrap()
        );
        let other = TreeCyclesConfig {
            seed: 8,
            ..cfg.clone()
        };
        assert_ne!(
            gen_tree_cycles(&cfg).unwrap(),
            gen_tree_cycles(&other).unwrap()
        );
        let ba = BaShapesConfig::default();
        assert_eq!(gen_ba_shapes(&ba).unwrap(), gen_ba_shapes(&ba).unwrap());
    }
}
