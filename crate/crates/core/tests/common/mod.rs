//! Fixtures shared by the integration tests: seeded small instances, a
//! scripted evaluator, and a dense GCN written independently of the library.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyx_core::diversify::{div_s, dsx_with, DiversityConfig};
use skyx_core::evalkit::brute_force_optimal;
use skyx_core::explain::ModelEvaluator;
use skyx_core::explain::{Bounds, EdgeInfoTable, EditOp, Evaluator};
use skyx_core::train::initial_model;
use skyx_core::{
    neighborhood, Assessment, EdgeId, GnnModel, Graph, MeasureSpec, MeasureVector, Neighborhood,
    NodeId, QueryConfig, VerifiedKind,
};

/// A random graph, a random 2-layer GCN and a target whose 2-hop
/// neighborhood has between 1 and `max_edges` edges.
pub struct Instance {
    pub graph: Graph,
    pub model: GnnModel,
    pub target: NodeId,
    pub seed: u64,
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, dim: usize) -> Graph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    let features = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Graph::new(n, edges, features).unwrap()
}

pub fn small_instance(seed: u64, max_edges: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(5..=9);
        let p = rng.gen_range(0.2..0.45);
        let g = random_graph(&mut rng, n, p, 3);
        let model = initial_model(3, &[6], 3, rng.gen()).unwrap();
        let fits: Vec<NodeId> = (0..n)
            .filter(|&v| {
                g.degree(v) > 0
                    && neighborhood(&g, v, 2).is_ok_and(|nb| nb.edges.len() <= max_edges)
            })
            .collect();
        if let Some(&target) = fits.get(rng.gen_range(0..fits.len().max(1))) {
            return Instance {
                graph: g,
                model,
                target,
                seed,
            };
        }
    }
}

/// Node set of the `hops`-hop ball around `v`, by breadth-first search.
pub fn ball(g: &Graph, v: NodeId, hops: usize) -> BTreeSet<NodeId> {
    let mut dist = HashMap::from([(v, 0usize)]);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d == hops {
            continue;
        }
        for &(w, _) in g.neighbors(u) {
            if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(w) {
                slot.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist.into_keys().collect()
}

/// Edges of `g` with both endpoints in `nodes`.
pub fn induced_edges(g: &Graph, nodes: &BTreeSet<NodeId>) -> Vec<EdgeId> {
    (0..g.edge_count())
        .filter(|&e| {
            let (a, b) = g.edge(e);
            nodes.contains(&a) && nodes.contains(&b)
        })
        .collect()
}

/// Class probabilities of `v` from a dense GCN over the given nodes and edges:
/// `Â = D^-1/2 (A + I) D^-1/2`, ReLU between layers, softmax at the end.
pub fn dense_probabilities(
    model: &GnnModel,
    g: &Graph,
    nodes: &BTreeSet<NodeId>,
    edges: &[EdgeId],
    v: NodeId,
) -> Vec<f64> {
    let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let n = nodes.len();
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &e in edges {
        let (x, y) = g.edge(e);
        a[index[&x]][index[&y]] = 1.0;
        a[index[&y]][index[&x]] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let mut h: Vec<Vec<f64>> = nodes.iter().map(|&u| g.features(u).to_vec()).collect();
    let layers = model.layers();
    for (l, w) in layers.iter().enumerate() {
        let mut agg = vec![vec![0.0; h[0].len()]; n];
        for i in 0..n {
            for j in 0..n {
                if a[i][j] != 0.0 {
                    let coef = 1.0 / (deg[i] * deg[j]).sqrt();
                    for (t, x) in h[j].iter().enumerate() {
                        agg[i][t] += coef * x;
                    }
                }
            }
        }
        h = agg
            .iter()
            .map(|row| {
                (0..w.cols)
                    .map(|c| {
                        let x: f64 = (0..w.rows).map(|r| row[r] * w.data[r * w.cols + c]).sum();
                        if l + 1 < layers.len() {
                            x.max(0.0)
                        } else {
                            x
                        }
                    })
                    .collect()
            })
            .collect();
    }
    let logits = &h[index[&v]];
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.iter().map(|x| x / total).collect()
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

/// Factual and counterfactual flags of a candidate, recomputed from scratch
/// with the dense GCN: the candidate alone, and the neighborhood without it,
/// against the prediction on the neighborhood.
pub fn verify_densely(
    model: &GnnModel,
    g: &Graph,
    v: NodeId,
    candidate: &[EdgeId],
) -> (bool, bool) {
    let hops = model.num_layers();
    let nodes = ball(g, v, hops);
    let all = induced_edges(g, &nodes);
    let reference = argmax(&dense_probabilities(model, g, &nodes, &all, v));
    let cand_nodes: BTreeSet<NodeId> = candidate
        .iter()
        .flat_map(|&e| {
            let (a, b) = g.edge(e);
            [a, b]
        })
        .collect();
    let factual = argmax(&dense_probabilities(model, g, &cand_nodes, candidate, v)) == reference;
    let rest: Vec<EdgeId> = all
        .iter()
        .copied()
        .filter(|e| !candidate.contains(e))
        .collect();
    let counterfactual = argmax(&dense_probabilities(model, g, &nodes, &rest, v)) != reference;
    (factual, counterfactual)
}

/// Every connected candidate containing `v`, as sorted edge lists.
pub fn connected_candidates(g: &Graph, nb: &Neighborhood) -> Vec<Vec<EdgeId>> {
    let edges = &nb.edges;
    (1u32..1 << edges.len())
        .map(|mask| {
            (0..edges.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| edges[i])
                .collect::<Vec<_>>()
        })
        .filter(|c| skyx_core::is_connected_with_anchor(g, c, nb.center))
        .collect()
}

/// An evaluator whose verdicts, losses and embeddings are given up front.
/// Unscripted candidates fail verification.
pub struct ScriptedEvaluator {
    pub graph: Graph,
    pub nb: Neighborhood,
    pub spec: MeasureSpec,
    pub script: HashMap<Vec<EdgeId>, (VerifiedKind, Vec<f64>)>,
    pub losses: HashMap<EdgeId, f64>,
    pub embeddings: HashMap<Vec<EdgeId>, Vec<f64>>,
    pub assessed: std::cell::RefCell<Vec<Vec<EdgeId>>>,
}

impl ScriptedEvaluator {
    pub fn new(graph: Graph, target: NodeId, hops: usize, spec: MeasureSpec) -> Self {
        let nb = neighborhood(&graph, target, hops).unwrap();
        Self {
            graph,
            nb,
            spec,
            script: HashMap::new(),
            losses: HashMap::new(),
            embeddings: HashMap::new(),
            assessed: Default::default(),
        }
    }

    pub fn script(&mut self, mut edges: Vec<EdgeId>, kind: VerifiedKind, phi: &[f64]) {
        edges.sort_unstable();
        self.script.insert(edges, (kind, phi.to_vec()));
    }
}

impl Evaluator for ScriptedEvaluator {
    fn graph(&self) -> &Graph {
        &self.graph
    }

    fn neighborhood(&self) -> &Neighborhood {
        &self.nb
    }

    fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    fn assess(&self, edges: &[EdgeId]) -> skyx_core::Result<Assessment> {
        self.assessed.borrow_mut().push(edges.to_vec());
        Ok(match self.script.get(edges) {
            Some((kind, phi)) => Assessment {
                kind: Some(*kind),
                raw: phi.clone(),
                phi: MeasureVector::new(phi.clone()),
            },
            None => Assessment {
                kind: None,
                raw: vec![0.5; self.spec.len()],
                phi: MeasureVector::new(vec![0.5; self.spec.len()]),
            },
        })
    }

    fn edit_loss(
        &self,
        _current: &[EdgeId],
        edge: EdgeId,
        _op: EditOp,
        _table: &mut EdgeInfoTable,
    ) -> f64 {
        self.losses.get(&edge).copied().unwrap_or(edge as f64)
    }

    fn peel_bounds(&self, _current: &[EdgeId]) -> Option<(Bounds, Bounds)> {
        None
    }

    fn embedding(&self, edges: &[EdgeId]) -> skyx_core::Result<Vec<f64>> {
        Ok(self
            .embeddings
            .get(edges)
            .cloned()
            .unwrap_or_else(|| vec![1.0, 0.0]))
    }
}

/// The running example: a three-leaf star around node 0. Onion peeling
/// visits {e1,e2}, {e0,e2}, {e0,e1}, then commits e0 and visits {e2}, {e1};
/// the fourth candidate fails verification.
pub fn running_example() -> ScriptedEvaluator {
    let g = Graph::new(4, [(0, 1), (0, 2), (0, 3)], vec![vec![1.0]; 4]).unwrap();
    let mut eval = ScriptedEvaluator::new(g, 0, 1, MeasureSpec::parse("fdl+,conc").unwrap());
    eval.script(vec![1, 2], VerifiedKind::Factual, &[0.30, 0.80]);
    eval.script(vec![0, 2], VerifiedKind::Factual, &[0.80, 0.40]);
    eval.script(vec![0, 1], VerifiedKind::Counterfactual, &[0.90, 0.25]);
    eval.script(vec![1], VerifiedKind::Both, &[0.70, 0.55]);
    eval.losses = HashMap::from([(0, 0.0), (1, 1.0), (2, 2.0)]);
    eval
}

/// The five-node, two-layer gradient fixture: max relative error between
/// analytic gradients and central finite differences of the loss.
pub fn max_gradient_error(weight_decay: f64) -> f64 {
    use skyx_core::train::loss_and_gradients;
    use skyx_core::{GnnModel, InferenceGraph};

    let g = Graph::new(
        5,
        [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)],
        vec![
            vec![0.5, -0.2, 0.1],
            vec![-0.3, 0.8, 0.4],
            vec![0.9, 0.1, -0.6],
            vec![0.2, -0.5, 0.7],
            vec![-0.8, 0.3, 0.2],
        ],
    )
    .unwrap();
    let labels = vec![Some(0), Some(1), Some(2), Some(1), None];
    let mask = vec![true, true, true, true, false];
    let graph = InferenceGraph::from_graph(&g);
    let model = initial_model(3, &[4], 3, 5).unwrap();
    let (_, grads) = loss_and_gradients(&model, &graph, &labels, &mask, weight_decay).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (l, grad) in grads.iter().enumerate() {
        for i in 0..grad.data.len() {
            let loss_at = |delta: f64| {
                let mut layers = model.layers().to_vec();
                layers[l].data[i] += delta;
                let m = GnnModel::new(layers, model.activation()).unwrap();
                loss_and_gradients(&m, &graph, &labels, &mask, weight_decay)
                    .unwrap()
                    .0
            };
            let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            let analytic = grad.data[i];
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-7 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    worst
}

/// Delegates to another evaluator and records every candidate it verifies.
pub struct Recording<E> {
    pub inner: E,
    pub calls: std::cell::RefCell<Vec<Vec<EdgeId>>>,
}

impl<E: Evaluator> Recording<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: Default::default(),
        }
    }
}

impl<E: Evaluator> Evaluator for Recording<E> {
    fn graph(&self) -> &Graph {
        self.inner.graph()
    }

    fn neighborhood(&self) -> &Neighborhood {
        self.inner.neighborhood()
    }

    fn spec(&self) -> &MeasureSpec {
        self.inner.spec()
    }

    fn assess(&self, edges: &[EdgeId]) -> skyx_core::Result<Assessment> {
        self.calls.borrow_mut().push(edges.to_vec());
        self.inner.assess(edges)
    }

    fn edit_loss(
        &self,
        current: &[EdgeId],
        edge: EdgeId,
        op: EditOp,
        table: &mut EdgeInfoTable,
    ) -> f64 {
        self.inner.edit_loss(current, edge, op, table)
    }

    fn peel_bounds(&self, current: &[EdgeId]) -> Option<(Bounds, Bounds)> {
        self.inner.peel_bounds(current)
    }

    fn embedding(&self, edges: &[EdgeId]) -> skyx_core::Result<Vec<f64>> {
        self.inner.embedding(edges)
    }
}

/// Fraction of small instances where the diversified run reaches
/// `(1/2 - ε)` of the best diversity over its own verified candidates.
pub fn half_minus_eps_rate(instances: u64) -> f64 {
    let mut hits = 0;
    for seed in 0..instances {
        let inst = small_instance(seed, 12);
        let mut cfg = QueryConfig::new(inst.target);
        cfg.k = 1 + (seed % 3) as usize;
        cfg.epsilon = 0.1;
        cfg.max_candidates = 15;
        let div = DiversityConfig::default();
        let eval = ModelEvaluator::new(&inst.graph, &inst.model, &cfg).unwrap();
        let out = dsx_with(&eval, &cfg, &div, &mut EdgeInfoTable::new()).unwrap();
        let states = out.states.states();
        let universe = eval.neighborhood().nodes.len();
        let nodes: Vec<Vec<usize>> = states
            .iter()
            .map(|s| inst.graph.nodes_of(&s.edges))
            .collect();
        let embs: Vec<Vec<f64>> = states
            .iter()
            .map(|s| eval.embedding(&s.edges).unwrap())
            .collect();
        let points: Vec<Vec<f64>> = states.iter().map(|s| s.phi.to_vec()).collect();
        let (_, best) = brute_force_optimal(&points, cfg.k, |set: &[usize]| {
            let n: Vec<&[usize]> = set.iter().map(|&i| nodes[i].as_slice()).collect();
            let e: Vec<&[f64]> = set.iter().map(|&i| embs[i].as_slice()).collect();
            div_s(&n, &e, universe, div.alpha)
        })
        .unwrap();
        if out.explanation.diversity.unwrap() >= (0.5 - cfg.epsilon) * best - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / instances as f64
}
