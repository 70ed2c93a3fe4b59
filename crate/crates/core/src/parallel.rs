//! Batch evaluation of many queries over one graph and model.
//!
//! Queries with overlapping neighborhoods are clustered with MinHash/LSH so
//! one thread sees them together and can reuse cached edge signals; parts are
//! balanced in size and estimated cost, and each thread handles its queries in
//! descending order of the target's core number.

use std::collections::{BTreeMap, HashMap};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diversify::{dsx_with, DiversityConfig};
use crate::error::{Error, Result};
use crate::explain::{explain_with, EdgeInfoTable, ExplainOutcome, ModelEvaluator, QueryConfig};
use crate::gnn::GnnModel;
use crate::graph::{k_core_numbers, neighborhood, Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshConfig {
    pub bands: usize,
    pub rows: usize,
    pub seed: u64,
}

impl Default for LshConfig {
    fn default() -> Self {
        Self {
            bands: 16,
            rows: 4,
            seed: 0,
        }
    }
}

impl LshConfig {
    pub fn signature_len(&self) -> usize {
        self.bands * self.rows
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// `sig_len` seeded hash minima per set. Empty sets get all-`u64::MAX`
/// signatures.
pub fn minhash_signatures(sets: &[Vec<usize>], sig_len: usize, seed: u64) -> Vec<Vec<u64>> {
    let salts: Vec<u64> = (0..sig_len as u64)
        .map(|i| splitmix64(seed ^ splitmix64(i)))
        .collect();
    sets.iter()
        .map(|set| {
            salts
                .iter()
                .map(|&salt| {
                    set.iter()
                        .map(|&x| splitmix64(x as u64 ^ salt))
                        .min()
                        .unwrap_or(u64::MAX)
                })
                .collect()
        })
        .collect()
}

/// Fraction of positions where two signatures agree.
pub fn signature_agreement(a: &[u64], b: &[u64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Groups sets that share at least one LSH band bucket. Clusters are listed
/// by their smallest member; members ascend.
pub fn lsh_clusters(sets: &[Vec<usize>], lsh: &LshConfig) -> Vec<Vec<usize>> {
    let signatures = minhash_signatures(sets, lsh.signature_len(), lsh.seed);
    let mut parent: Vec<usize> = (0..sets.len()).collect();
    for band in 0..lsh.bands {
        let mut buckets: HashMap<&[u64], usize> = HashMap::new();
        for (i, sig) in signatures.iter().enumerate() {
            let key = &sig[band * lsh.rows..(band + 1) * lsh.rows];
            match buckets.get(key) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
                None => {
                    buckets.insert(key, i);
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..sets.len() {
        let root = find(&mut parent, i);
        clusters.entry(root).or_default().push(i);
    }
    clusters.into_values().collect()
}

/// Cuts `order` into `parts` contiguous chunks whose sizes differ by at most one.
fn chop(order: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let (base, extra) = (order.len() / parts, order.len() % parts);
    let mut out = Vec::with_capacity(parts);
    let mut at = 0;
    for p in 0..parts {
        let size = base + usize::from(p < extra);
        out.push(order[at..at + size].to_vec());
        at += size;
    }
    out
}

/// Swaps single items between the heaviest and lightest part until their
/// weights differ by at most the largest item cost. Sizes are unchanged.
fn repair_weights(parts: &mut [Vec<usize>], costs: &[f64]) {
    let max_cost = costs.iter().copied().fold(0.0, f64::max);
    let weight = |p: &Vec<usize>| p.iter().map(|&i| costs[i]).sum::<f64>();
    loop {
        let weights: Vec<f64> = parts.iter().map(weight).collect();
        let heavy = (0..parts.len())
            .max_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(b.cmp(&a)))
            .unwrap();
        let light = (0..parts.len())
            .min_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)))
            .unwrap();
        let gap = weights[heavy] - weights[light];
        if gap <= max_cost {
            return;
        }
        // a swap moving δ = c_a - c_b with 0 < δ < gap shrinks the gap
        let mut best: Option<(usize, usize, f64)> = None;
        for (ia, &a) in parts[heavy].iter().enumerate() {
            for (ib, &b) in parts[light].iter().enumerate() {
                let delta = costs[a] - costs[b];
                if delta > 0.0 && delta < gap {
                    let score = (gap / 2.0 - delta).abs();
                    if best.is_none_or(|(_, _, s)| score < s) {
                        best = Some((ia, ib, score));
                    }
                }
            }
        }
        let Some((ia, ib, _)) = best else { return };
        let a = parts[heavy][ia];
        parts[heavy][ia] = parts[light][ib];
        parts[light][ib] = a;
    }
}

/// Partitions query indices into `min(m, n)` parts: LSH clusters are laid out
/// back to back and cut into equal-size chunks (splitting large clusters and
/// merging small ones), then rebalanced by estimated cost.
pub fn cluster_partition(
    node_sets: &[Vec<usize>],
    costs: &[f64],
    m: usize,
    lsh: &LshConfig,
) -> Vec<Vec<usize>> {
    let n = node_sets.len();
    if n == 0 {
        return Vec::new();
    }
    let order: Vec<usize> = lsh_clusters(node_sets, lsh).into_iter().flatten().collect();
    let mut parts = chop(&order, m.clamp(1, n));
    repair_weights(&mut parts, costs);
    for p in &mut parts {
        p.sort_unstable();
    }
    parts
}

/// Seeded shuffle cut into equal-size chunks; the baseline without clustering.
pub fn random_partition(n: usize, m: usize, seed: u64) -> Vec<Vec<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = chop(&order, m.clamp(1, n));
    for p in &mut parts {
        p.sort_unstable();
    }
    parts
}

/// Query positions ordered by descending core number of their target, ties by
/// node id then position.
pub fn prioritize_nodes(part: &[usize], targets: &[NodeId], cores: &[usize]) -> Vec<usize> {
    let mut out = part.to_vec();
    out.sort_by(|&a, &b| {
        let (va, vb) = (targets[a], targets[b]);
        cores[vb].cmp(&cores[va]).then(va.cmp(&vb)).then(a.cmp(&b))
    });
    out
}

/// Estimated cost of a query: the edge count of its L-hop neighborhood.
pub fn estimate_cost(g: &Graph, v: NodeId, hops: usize) -> usize {
    neighborhood(g, v, hops).map_or(0, |nb| nb.edges.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOptions {
    pub threads: usize,
    /// Reuse edge signals across queries of one thread.
    pub share: bool,
    /// Cluster queries by neighborhood overlap; otherwise partition at random.
    pub cluster: bool,
    pub lsh: LshConfig,
    pub seed: u64,
    pub diversify: Option<DiversityConfig>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            share: true,
            cluster: true,
            lsh: LshConfig::default(),
            seed: 0,
            diversify: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ThreadReport {
    pub queries: Vec<usize>,
    pub estimator_computations: usize,
    pub estimator_reuses: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug)]
pub struct BatchResult {
    /// One entry per query, in input order.
    pub results: Vec<Result<ExplainOutcome>>,
    pub threads: Vec<ThreadReport>,
    pub elapsed: Duration,
}

impl BatchResult {
    pub fn errors(&self) -> Vec<(usize, &Error)> {
        self.results
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e)))
            .collect()
    }
}

fn run_query(
    g: &Graph,
    model: &GnnModel,
    cfg: &QueryConfig,
    diversify: Option<&DiversityConfig>,
    table: &mut EdgeInfoTable,
) -> Result<ExplainOutcome> {
    let eval = ModelEvaluator::new(g, model, cfg)?;
    match diversify {
        Some(div) => dsx_with(&eval, cfg, div, table),
        None => explain_with(&eval, cfg, table),
    }
}

/// Evaluates a batch of queries on `opts.threads` threads. Errors stay with
/// their query; the other results are unaffected.
pub fn para_sx(
    g: &Graph,
    model: &GnnModel,
    queries: &[QueryConfig],
    opts: &BatchOptions,
) -> Result<BatchResult> {
    if opts.threads == 0 {
        return Err(Error::InvalidConfig(
            "thread count must be at least 1".into(),
        ));
    }
    let start = Instant::now();
    let hops = model.num_layers();
    let targets: Vec<NodeId> = queries.iter().map(|q| q.target).collect();
    let parts = if opts.cluster {
        let sets: Vec<Vec<usize>> = targets
            .iter()
            .map(|&v| neighborhood(g, v, hops).map_or_else(|_| vec![v], |nb| nb.nodes))
            .collect();
        let costs: Vec<f64> = targets
            .iter()
            .map(|&v| estimate_cost(g, v, hops).max(1) as f64)
            .collect();
        cluster_partition(&sets, &costs, opts.threads, &opts.lsh)
    } else {
        random_partition(queries.len(), opts.threads, opts.seed)
    };
    let cores = k_core_numbers(g);

    let mut slots: Vec<Option<Result<ExplainOutcome>>> = (0..queries.len()).map(|_| None).collect();
    let mut reports = Vec::with_capacity(parts.len());
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for part in &parts {
            let tx = tx.clone();
            let order = prioritize_nodes(part, &targets, &cores);
            let diversify = opts.diversify.as_ref();
            scope.spawn(move || {
                let started = Instant::now();
                let mut shared = EdgeInfoTable::new();
                let mut report = ThreadReport {
                    queries: order.clone(),
                    ..ThreadReport::default()
                };
                let mut results = Vec::with_capacity(order.len());
                for &i in &order {
                    let mut own = EdgeInfoTable::new();
                    let table = if opts.share { &mut shared } else { &mut own };
                    let outcome = run_query(g, model, &queries[i], diversify, table);
                    if let Ok(o) = &outcome {
                        report.estimator_computations += o.stats.estimator_computations;
                        report.estimator_reuses += o.stats.estimator_reuses;
                    }
                    results.push((i, outcome));
                }
                report.elapsed = started.elapsed();
                // the receiver outlives every sender inside the scope
                let _ = tx.send((results, report));
            });
        }
        drop(tx);
        for (results, report) in rx {
            for (i, outcome) in results {
                slots[i] = Some(outcome);
            }
            reports.push(report);
        }
    });
    reports.sort_by_key(|r| r.queries.iter().min().copied());
    Ok(BatchResult {
        results: slots
            .into_iter()
            .map(|s| s.expect("every query is assigned to a part"))
            .collect(),
        threads: reports,
        elapsed: start.elapsed(),
    })
}
