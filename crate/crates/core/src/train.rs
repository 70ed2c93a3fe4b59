//! Full-batch GCN training with Adam on masked cross-entropy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{softmax_in_place, Activation, GnnModel, InferenceGraph, Matrix};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hidden layer widths; the layer count is `hidden.len() + 1`.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![20, 20, 20],
            epochs: 1000,
            learning_rate: 0.01,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

/// Glorot-uniform weights drawn from `seed`.
pub fn initial_model(
    input_dim: usize,
    hidden: &[usize],
    classes: usize,
    seed: u64,
) -> Result<GnnModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(classes);
    let layers = dims
        .windows(2)
        .map(|pair| {
            let (rows, cols) = (pair[0], pair[1]);
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Matrix {
                rows,
                cols,
                data: (0..rows * cols)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
            }
        })
        .collect();
    GnnModel::new(layers, Activation::Relu)
}

/// Mean cross-entropy over the masked nodes (plus `weight_decay/2 · ‖W‖²`) and
/// its gradient with respect to every weight matrix.
pub fn loss_and_gradients(
    model: &GnnModel,
    graph: &InferenceGraph,
    labels: &[Option<usize>],
    mask: &[bool],
    weight_decay: f64,
) -> Result<(f64, Vec<Matrix>)> {
    let n = graph.nodes().len();
    if labels.len() != n || mask.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len().min(mask.len()),
            context: "labels/mask vs nodes",
        });
    }
    let targets: Vec<(usize, usize)> = (0..n)
        .filter(|&i| mask[i])
        .filter_map(|i| labels[i].map(|c| (i, c)))
        .collect();
    if targets.is_empty() {
        return Err(Error::NoLabeledNodes);
    }
    if let Some(&(_, c)) = targets.iter().find(|&&(_, c)| c >= model.class_count()) {
        return Err(Error::InvalidConfig(format!(
            "label {c} exceeds the model's {} classes",
            model.class_count()
        )));
    }
    let adjacency = graph.adjacency();
    let layers = model.layers();
    let last = layers.len() - 1;

    // propagated inputs and pre-activations per layer
    let mut propagated = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut h = graph.features().clone();
    for (l, w) in layers.iter().enumerate() {
        let p = adjacency.propagate(&h);
        let z = p.matmul(w);
        h = z.clone();
        if l < last {
            for x in &mut h.data {
                *x = x.max(0.0);
            }
        }
        propagated.push(p);
        pre.push(z);
    }

    let scale = 1.0 / targets.len() as f64;
    let mut loss = 0.0;
    let mut grad_z = Matrix::zeros(n, model.class_count());
    for &(i, c) in &targets {
        let mut row = pre[last].row(i).to_vec();
        softmax_in_place(&mut row);
        loss -= row[c].max(f64::MIN_POSITIVE).ln() * scale;
        row[c] -= 1.0;
        for (g, p) in grad_z.row_mut(i).iter_mut().zip(row) {
            *g = p * scale;
        }
    }

    let mut grads = vec![Matrix::zeros(0, 0); layers.len()];
    for l in (0..layers.len()).rev() {
        grads[l] = propagated[l].t_matmul(&grad_z);
        if l > 0 {
            let grad_p = grad_z.matmul_t(&layers[l]);
            // Â is symmetric, so Âᵀ·g = Â·g
            let mut grad_h = adjacency.propagate(&grad_p);
            for (g, &z) in grad_h.data.iter_mut().zip(&pre[l - 1].data) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
            grad_z = grad_h;
        }
    }
    if weight_decay > 0.0 {
        for (grad, w) in grads.iter_mut().zip(layers) {
            for (g, &x) in grad.data.iter_mut().zip(&w.data) {
                *g += weight_decay * x;
            }
            loss += 0.5 * weight_decay * w.data.iter().map(|x| x * x).sum::<f64>();
        }
    }
    Ok((loss, grads))
}

/// Trains a GCN on the whole graph. Deterministic for a fixed config.
pub fn train_gcn(g: &Graph, train_mask: &[bool], config: &TrainConfig) -> Result<GnnModel> {
    if train_mask.len() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            actual: train_mask.len(),
            context: "training mask",
        });
    }
    if !(0..g.node_count()).any(|v| train_mask[v] && g.label(v).is_some()) {
        return Err(Error::NoLabeledNodes);
    }
    let classes = g
        .labels()
        .iter()
        .flatten()
        .max()
        .map_or(1, |&c| c + 1)
        .max(2);
    let mut model = initial_model(g.feature_dim(), &config.hidden, classes, config.seed)?;
    if config.epochs == 0 {
        return Ok(model);
    }
    let graph = InferenceGraph::from_graph(g);
    let mut layers = model.layers().to_vec();
    let mut first_moment: Vec<Vec<f64>> = layers.iter().map(|w| vec![0.0; w.data.len()]).collect();
    let mut second_moment = first_moment.clone();
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);

    for epoch in 1..=config.epochs {
        let (loss, grads) =
            loss_and_gradients(&model, &graph, g.labels(), train_mask, config.weight_decay)?;
        if epoch == 1 || epoch % 100 == 0 {
            log::debug!("epoch {epoch}: loss {loss:.6}");
        }
        let correction1 = 1.0 - beta1.powi(epoch as i32);
        let correction2 = 1.0 - beta2.powi(epoch as i32);
        for (l, grad) in grads.iter().enumerate() {
            for (i, &gi) in grad.data.iter().enumerate() {
                let m = &mut first_moment[l][i];
                let v = &mut second_moment[l][i];
                *m = beta1 * *m + (1.0 - beta1) * gi;
                *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                let step = (*m / correction1) / ((*v / correction2).sqrt() + eps);
                layers[l].data[i] -= config.learning_rate * step;
            }
        }
        model = GnnModel::new(layers.clone(), Activation::Relu)?;
    }
    Ok(model)
}

/// Fraction of masked labeled nodes whose predicted class matches the label.
pub fn accuracy(model: &GnnModel, g: &Graph, mask: &[bool]) -> Result<f64> {
    let out = crate::gnn::forward(model, &InferenceGraph::from_graph(g))?;
    let mut hits = 0usize;
    let mut total = 0usize;
    for (v, &masked) in mask.iter().enumerate().take(g.node_count()) {
        if let (true, Some(label)) = (masked, g.label(v)) {
            total += 1;
            hits += usize::from(out.predicted[v] == label);
        }
    }
    if total == 0 {
        return Err(Error::NoLabeledNodes);
    }
    Ok(hits as f64 / total as f64)
}
