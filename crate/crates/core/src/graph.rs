//! Attributed undirected graphs, L-hop neighborhoods and k-core numbers.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

/// Immutable undirected simple graph with per-node features.
///
/// Edges are stored once as `(low, high)` pairs sorted lexicographically; an
/// edge's id is its position in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    feature_dim: usize,
    features: Vec<f64>,
    labels: Vec<Option<usize>>,
    ground_truth: Vec<bool>,
}

impl Graph {
    /// Builds a graph. Edge direction is ignored, duplicates are merged and
    /// self-loops are dropped.
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        features: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if features.len() != node_count {
            return Err(Error::DimensionMismatch {
                expected: node_count,
                actual: features.len(),
                context: "feature rows",
            });
        }
        let feature_dim = features.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(node_count * feature_dim);
        for (node, row) in features.iter().enumerate() {
            if row.len() != feature_dim {
                return Err(Error::InvalidGraph(format!(
                    "node {node} has {} features, expected {feature_dim}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "node {node} has a non-finite feature"
                )));
            }
            flat.extend_from_slice(row);
        }

        let mut pairs = Vec::new();
        for (a, b) in edges {
            for node in [a, b] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange { node, node_count });
                }
            }
            if a != b {
                pairs.push((a.min(b), a.max(b)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut adjacency = vec![Vec::new(); node_count];
        for (id, &(a, b)) in pairs.iter().enumerate() {
            adjacency[a].push((b, id));
            adjacency[b].push((a, id));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        Ok(Self {
            node_count,
            edges: pairs,
            adjacency,
            feature_dim,
            features: flat,
            labels: vec![None; node_count],
            ground_truth: vec![false; node_count],
        })
    }

    pub fn with_labels(mut self, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != self.node_count {
            return Err(Error::DimensionMismatch {
                expected: self.node_count,
                actual: labels.len(),
                context: "labels",
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_ground_truth(mut self, nodes: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        for node in nodes {
            if node >= self.node_count {
                return Err(Error::NodeOutOfRange {
                    node,
                    node_count: self.node_count,
                });
            }
            self.ground_truth[node] = true;
        }
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> (NodeId, NodeId) {
        self.edges[id]
    }

    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_id(&self, a: NodeId, b: NodeId) -> Option<EdgeId> {
        let list = self.adjacency.get(a)?;
        list.binary_search_by_key(&b, |&(n, _)| n)
            .ok()
            .map(|i| list[i].1)
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn features(&self, node: NodeId) -> &[f64] {
        &self.features[node * self.feature_dim..(node + 1) * self.feature_dim]
    }

    pub fn label(&self, node: NodeId) -> Option<usize> {
        self.labels[node]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn is_ground_truth(&self, node: NodeId) -> bool {
        self.ground_truth[node]
    }

    pub fn ground_truth_nodes(&self) -> Vec<NodeId> {
        (0..self.node_count)
            .filter(|&n| self.ground_truth[n])
            .collect()
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node < self.node_count {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node,
                node_count: self.node_count,
            })
        }
    }

    /// Sorted, deduplicated endpoints of an edge set.
    pub fn nodes_of(&self, edges: &[EdgeId]) -> Vec<NodeId> {
        let mut nodes: Vec<NodeId> = edges
            .iter()
            .flat_map(|&e| {
                let (a, b) = self.edges[e];
                [a, b]
            })
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

/// An edge-induced connected subgraph that contains its anchor node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subgraph {
    anchor: NodeId,
    edges: Vec<EdgeId>,
}

impl Subgraph {
    pub fn new(g: &Graph, mut edges: Vec<EdgeId>, anchor: NodeId) -> Result<Self> {
        g.check_node(anchor)?;
        edges.sort_unstable();
        edges.dedup();
        if let Some(&bad) = edges.iter().find(|&&e| e >= g.edge_count()) {
            return Err(Error::InvalidSubgraph(format!("unknown edge id {bad}")));
        }
        if edges.is_empty() {
            return Err(Error::InvalidSubgraph("edge set is empty".into()));
        }
        if !is_connected_with_anchor(g, &edges, anchor) {
            return Err(Error::InvalidSubgraph(format!(
                "edge set is disconnected or does not touch anchor {anchor}"
            )));
        }
        Ok(Self { anchor, edges })
    }

    pub fn anchor(&self) -> NodeId {
        self.anchor
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn nodes(&self, g: &Graph) -> Vec<NodeId> {
        g.nodes_of(&self.edges)
    }
}

/// True iff the edge-induced graph is connected and `anchor` has degree >= 1
/// in it.
pub fn is_connected_with_anchor(g: &Graph, edges: &[EdgeId], anchor: NodeId) -> bool {
    if edges.is_empty() {
        return false;
    }
    let mut local: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &e in edges {
        let (a, b) = g.edge(e);
        local.entry(a).or_default().push(b);
        local.entry(b).or_default().push(a);
    }
    if !local.contains_key(&anchor) {
        return false;
    }
    let mut seen = BTreeMap::new();
    seen.insert(anchor, ());
    let mut queue = VecDeque::from([anchor]);
    while let Some(u) = queue.pop_front() {
        for &w in &local[&u] {
            if seen.insert(w, ()).is_none() {
                queue.push_back(w);
            }
        }
    }
    seen.len() == local.len()
}

/// The node-induced L-hop neighborhood of a center node, with hop distances
/// and the onion layer of every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub center: NodeId,
    pub hops: usize,
    /// Sorted node ids within `hops` of the center.
    pub nodes: Vec<NodeId>,
    /// Sorted edge ids with both endpoints in `nodes`.
    pub edges: Vec<EdgeId>,
    hop_of: BTreeMap<NodeId, usize>,
}

impl Neighborhood {
    pub fn hop(&self, node: NodeId) -> Option<usize> {
        self.hop_of.get(&node).copied()
    }

    /// Layer of an edge: the larger hop distance of its endpoints. Layer 1
    /// holds the edges closest to the center.
    pub fn layer(&self, g: &Graph, edge: EdgeId) -> usize {
        let (a, b) = g.edge(edge);
        self.hop_of[&a].max(self.hop_of[&b])
    }

    /// Edge ids grouped by layer; index 0 is layer 1.
    pub fn layers(&self, g: &Graph) -> Vec<Vec<EdgeId>> {
        let mut layers = vec![Vec::new(); self.hops];
        for &e in &self.edges {
            layers[self.layer(g, e) - 1].push(e);
        }
        layers
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.hop_of.contains_key(&node)
    }

    pub fn as_subgraph(&self) -> Subgraph {
        Subgraph {
            anchor: self.center,
            edges: self.edges.clone(),
        }
    }
}

/// Breadth-first extraction of the L-hop neighborhood. Fails if the center has
/// no incident edge, since then no non-empty candidate exists.
pub fn neighborhood(g: &Graph, center: NodeId, hops: usize) -> Result<Neighborhood> {
    g.check_node(center)?;
    if hops == 0 {
        return Err(Error::InvalidConfig("hop count must be at least 1".into()));
    }
    if g.degree(center) == 0 {
        return Err(Error::EmptyInterpretableSpace(center));
    }
    let mut hop_of = BTreeMap::new();
    hop_of.insert(center, 0);
    let mut queue = VecDeque::from([center]);
    while let Some(u) = queue.pop_front() {
        let d = hop_of[&u];
        if d == hops {
            continue;
        }
        for &(w, _) in g.neighbors(u) {
            if let std::collections::btree_map::Entry::Vacant(slot) = hop_of.entry(w) {
                slot.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    let nodes: Vec<NodeId> = hop_of.keys().copied().collect();
    let mut edges: Vec<EdgeId> = nodes
        .iter()
        .flat_map(|&u| {
            g.neighbors(u)
                .iter()
                .filter(move |&&(w, _)| u < w)
                .map(|&(w, e)| (w, e))
        })
        .filter(|&(w, _)| hop_of.contains_key(&w))
        .map(|(_, e)| e)
        .collect();
    edges.sort_unstable();
    Ok(Neighborhood {
        center,
        hops,
        nodes,
        edges,
        hop_of,
    })
}

/// The edge-induced subgraph on the L-hop node set of `v`.
pub fn l_hop_subgraph(g: &Graph, v: NodeId, hops: usize) -> Result<Subgraph> {
    neighborhood(g, v, hops).map(|n| n.as_subgraph())
}

/// Core number of every node by bucket peeling (Batagelj-Zaversnik).
pub fn k_core_numbers(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let max_degree = degree.iter().copied().max().unwrap_or(0);

    let mut bin = vec![0usize; max_degree + 1];
    for &d in &degree {
        bin[d] += 1;
    }
    let mut start = 0;
    for slot in bin.iter_mut() {
        let count = *slot;
        *slot = start;
        start += count;
    }
    let mut order = vec![0usize; n];
    let mut position = vec![0usize; n];
    for v in 0..n {
        position[v] = bin[degree[v]];
        order[position[v]] = v;
        bin[degree[v]] += 1;
    }
    for d in (1..=max_degree).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;

    for i in 0..n {
        let v = order[i];
        for &(u, _) in g.neighbors(v) {
            if degree[u] > degree[v] {
                let du = degree[u];
                let pu = position[u];
                let pw = bin[du];
                let w = order[pw];
                if u != w {
                    order.swap(pu, pw);
                    position[u] = pw;
                    position[w] = pu;
                }
                bin[du] += 1;
                degree[u] -= 1;
            }
        }
    }
    degree
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_features(n: usize) -> Vec<Vec<f64>> {
        vec![vec![1.0]; n]
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(n, edges.iter().copied(), unit_features(n)).unwrap()
    }

    fn edge_pairs(g: &Graph, s: &Subgraph) -> Vec<(usize, usize)> {
        s.edges().iter().map(|&e| g.edge(e)).collect()
    }

    #[test]
    fn ingest_dedups_and_drops_self_loops() {
        let g = graph(3, &[(0, 1), (1, 0), (2, 2), (1, 2)]);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.edge_id(2, 1), Some(1));
        assert_eq!(g.edge_id(0, 2), None);
    }

    #[test]
    fn ingest_rejects_out_of_range_endpoint() {
        let err = Graph::new(2, [(0, 5)], unit_features(2)).unwrap_err();
        assert!(matches!(err, Error::NodeOutOfRange { node: 5, .. }));
    }

    #[test]
    fn ingest_rejects_ragged_features() {
        let err = Graph::new(2, [(0, 1)], vec![vec![1.0], vec![1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidGraph(_)));
    }

    #[test]
    fn l_hop_on_a_path() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let one = l_hop_subgraph(&g, 0, 1).unwrap();
        assert_eq!(edge_pairs(&g, &one), vec![(0, 1)]);
        let two = l_hop_subgraph(&g, 0, 2).unwrap();
        assert_eq!(edge_pairs(&g, &two), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn l_hop_keeps_fringe_edges() {
        // 1 and 2 are both one hop from 0; their edge is kept.
        let g = graph(3, &[(0, 1), (0, 2), (1, 2)]);
        let n = neighborhood(&g, 0, 1).unwrap();
        assert_eq!(n.edges.len(), 3);
        assert_eq!(n.layers(&g), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn l_hop_rejects_isolated_node() {
        let g = graph(3, &[(0, 1)]);
        assert!(matches!(
            l_hop_subgraph(&g, 2, 1),
            Err(Error::EmptyInterpretableSpace(2))
        ));
        assert!(matches!(
            l_hop_subgraph(&g, 7, 1),
            Err(Error::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn layers_follow_hop_distance() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let n = neighborhood(&g, 0, 3).unwrap();
        assert_eq!(n.layers(&g), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(n.hop(3), Some(3));
    }

    #[test]
    fn connectivity_predicate() {
        let g = graph(4, &[(0, 1), (2, 3), (1, 2)]);
        let ab = g.edge_id(0, 1).unwrap();
        let cd = g.edge_id(2, 3).unwrap();
        let bc = g.edge_id(1, 2).unwrap();
        assert!(is_connected_with_anchor(&g, &[ab], 0));
        assert!(!is_connected_with_anchor(&g, &[ab, cd], 0));
        assert!(!is_connected_with_anchor(&g, &[bc], 0));
        assert!(!is_connected_with_anchor(&g, &[], 0));
        assert!(Subgraph::new(&g, vec![ab, cd], 0).is_err());
        assert!(Subgraph::new(&g, vec![ab, bc, cd], 0).is_ok());
    }

    #[test]
    fn core_numbers_small_cases() {
        let triangle = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(k_core_numbers(&triangle), vec![2, 2, 2]);

        let star = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(k_core_numbers(&star), vec![1, 1, 1, 1, 1]);

        let pendant = graph(4, &[(0, 1), (1, 2), (0, 2), (2, 3)]);
        assert_eq!(k_core_numbers(&pendant), vec![2, 2, 2, 1]);

        let isolated = graph(2, &[]);
        assert_eq!(k_core_numbers(&isolated), vec![0, 0]);
    }
}
