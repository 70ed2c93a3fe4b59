//! Deterministic GCN inference: `H' = act(Â H W)` with
//! `Â = D^-1/2 (A + I) D^-1/2`, ReLU between layers and a linear last layer
//! followed by a row softmax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, NodeId};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidModel("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · rhs`
    pub fn t_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "t_matmul shape mismatch");
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · rhsᵀ`
    pub fn matmul_t(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols, "matmul_t shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            for j in 0..rhs.rows {
                out.data[i * rhs.rows + j] =
                    self.row(i).iter().zip(rhs.row(j)).map(|(a, b)| a * b).sum();
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
        }
    }
}

/// A fixed GCN: one weight matrix per layer, no biases.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    layers: Vec<Matrix>,
    activation: Activation,
}

impl GnnModel {
    pub fn new(layers: Vec<Matrix>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("model needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].cols != pair[1].rows {
                return Err(Error::InvalidModel(format!(
                    "layer {i} outputs {} columns but layer {} expects {} rows",
                    pair[0].cols,
                    i + 1,
                    pair[1].rows
                )));
            }
        }
        for (i, w) in layers.iter().enumerate() {
            if w.data.len() != w.rows * w.cols {
                return Err(Error::InvalidModel(format!(
                    "layer {i} has {} values for a {}x{} matrix",
                    w.data.len(),
                    w.rows,
                    w.cols
                )));
            }
            if w.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "layer {i} has a non-finite weight"
                )));
            }
            if w.rows == 0 || w.cols == 0 {
                return Err(Error::InvalidModel(format!("layer {i} is empty")));
            }
        }
        Ok(Self { layers, activation })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].rows
    }

    pub fn class_count(&self) -> usize {
        self.layers[self.layers.len() - 1].cols
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }
}

/// Sparse symmetric-normalized adjacency with self loops, one sorted row per
/// node.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    rows: Vec<Vec<(usize, f64)>>,
}

impl NormalizedAdjacency {
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    /// `Â · h`
    pub fn propagate(&self, h: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(h.rows, h.cols);
        for (i, row) in self.rows.iter().enumerate() {
            let out_row = &mut out.data[i * h.cols..(i + 1) * h.cols];
            for &(j, w) in row {
                for (o, &x) in out_row.iter_mut().zip(h.row(j)) {
                    *o += w * x;
                }
            }
        }
        out
    }
}

/// `D^-1/2 (A + I) D^-1/2` over `n` nodes and undirected local edges. Isolated
/// nodes keep only their self-loop entry of 1.
pub fn normalize_adjacency(n: usize, edges: &[(usize, usize)]) -> NormalizedAdjacency {
    let mut neighbors: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for &(a, b) in edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    let degree: Vec<f64> = neighbors.iter().map(|list| list.len() as f64).collect();
    let rows = neighbors
        .into_iter()
        .enumerate()
        .map(|(i, mut list)| {
            list.sort_unstable();
            list.into_iter()
                .map(|j| (j, 1.0 / (degree[i] * degree[j]).sqrt()))
                .collect()
        })
        .collect();
    NormalizedAdjacency { rows }
}

/// A graph prepared for inference: a sorted list of parent node ids, edges in
/// local indices, and the matching feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceGraph {
    nodes: Vec<NodeId>,
    adjacency: NormalizedAdjacency,
    features: Matrix,
}

impl InferenceGraph {
    pub fn from_graph(g: &Graph) -> Self {
        let nodes: Vec<NodeId> = (0..g.node_count()).collect();
        let edges: Vec<EdgeId> = (0..g.edge_count()).collect();
        Self::build(g, nodes, &edges)
    }

    /// The graph with node set `nodes` (which must cover every edge endpoint)
    /// and edge set `edges`.
    pub fn from_parts(g: &Graph, nodes: &[NodeId], edges: &[EdgeId]) -> Result<Self> {
        let mut nodes = nodes.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        for &v in &nodes {
            g.check_node(v)?;
        }
        for &e in edges {
            if e >= g.edge_count() {
                return Err(Error::InvalidSubgraph(format!("unknown edge id {e}")));
            }
            let (a, b) = g.edge(e);
            if nodes.binary_search(&a).is_err() || nodes.binary_search(&b).is_err() {
                return Err(Error::InvalidSubgraph(format!(
                    "edge {e} has an endpoint outside the node set"
                )));
            }
        }
        Ok(Self::build(g, nodes, edges))
    }

    /// The edge-induced graph of `edges`.
    pub fn from_edges(g: &Graph, edges: &[EdgeId]) -> Result<Self> {
        let nodes = g.nodes_of(edges);
        Self::from_parts(g, &nodes, edges)
    }

    fn build(g: &Graph, nodes: Vec<NodeId>, edges: &[EdgeId]) -> Self {
        let local = |v: NodeId| nodes.binary_search(&v).expect("endpoint in node set");
        let local_edges: Vec<(usize, usize)> = edges
            .iter()
            .map(|&e| {
                let (a, b) = g.edge(e);
                (local(a), local(b))
            })
            .collect();
        let adjacency = normalize_adjacency(nodes.len(), &local_edges);
        let mut features = Matrix::zeros(nodes.len(), g.feature_dim());
        for (i, &v) in nodes.iter().enumerate() {
            features.row_mut(i).copy_from_slice(g.features(v));
        }
        Self {
            nodes,
            adjacency,
            features,
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn local_index(&self, v: NodeId) -> Option<usize> {
        self.nodes.binary_search(&v).ok()
    }

    pub fn adjacency(&self) -> &NormalizedAdjacency {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    /// Final-layer outputs, one row per local node.
    pub embeddings: Matrix,
    pub probabilities: Matrix,
    pub predicted: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub probability: f64,
    pub probabilities: Vec<f64>,
}

pub fn forward(model: &GnnModel, graph: &InferenceGraph) -> Result<InferenceResult> {
    if graph.features.cols != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: graph.features.cols,
            context: "node features vs first layer",
        });
    }
    let last = model.num_layers() - 1;
    let mut h = graph.features.clone();
    for (l, w) in model.layers.iter().enumerate() {
        h = graph.adjacency.propagate(&h).matmul(w);
        if l < last {
            for x in &mut h.data {
                *x = model.activation.apply(*x);
            }
        }
    }
    let mut probabilities = h.clone();
    let mut predicted = Vec::with_capacity(h.rows);
    for r in 0..probabilities.rows {
        let row = probabilities.row_mut(r);
        softmax_in_place(row);
        predicted.push(argmax(row));
    }
    Ok(InferenceResult {
        embeddings: h,
        probabilities,
        predicted,
    })
}

/// Label and probability of `v`; ties go to the lowest class index.
pub fn predict(model: &GnnModel, graph: &InferenceGraph, v: NodeId) -> Result<Prediction> {
    let i = graph.local_index(v).ok_or(Error::NodeAbsent(v))?;
    let result = forward(model, graph)?;
    let probabilities = result.probabilities.row(i).to_vec();
    let label = result.predicted[i];
    Ok(Prediction {
        label,
        probability: probabilities[label],
        probabilities,
    })
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}
