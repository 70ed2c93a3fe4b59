use crate::error::{Error, Result};
use crate::explain::{Evaluator, ModelEvaluator, QueryConfig};
use crate::gnn::GnnModel;
use crate::graph::{is_connected_with_anchor, EdgeId, Graph, NodeId};
use crate::measures::{Assessment, MeasureSpec};
use crate::skyline::{dominates, eps_dominates};

/// Largest neighborhood (in edges) the exhaustive enumeration accepts.
pub const DEFAULT_GUARD: usize = 14;

/// Upper bound on subsets the optimal-set search may visit.
const SUBSET_LIMIT: u128 = 5_000_000;

/// Every connected, anchored, non-empty edge subset of the neighborhood that
/// passes verification, with its assessment. Subsets are visited in bitmask
/// order over the sorted neighborhood edges.
pub fn brute_force_space_with<E: Evaluator + ?Sized>(
    eval: &E,
    guard: usize,
) -> Result<Vec<(Vec<EdgeId>, Assessment)>> {
    let nb = eval.neighborhood();
    let edges = &nb.edges;
    if edges.len() > guard.min(30) {
        return Err(Error::GuardExceeded {
            edges: edges.len(),
            guard,
        });
    }
    let mut space = Vec::new();
    for mask in 1u32..(1u32 << edges.len()) {
        let subset: Vec<EdgeId> = (0..edges.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| edges[i])
            .collect();
        if !is_connected_with_anchor(eval.graph(), &subset, nb.center) {
            continue;
        }
        let assessment = eval.assess(&subset)?;
        if assessment.kind.is_some() {
            space.push((subset, assessment));
        }
    }
    Ok(space)
}

/// The verified interpretable space of `v` under `model`.
pub fn brute_force_space(
    g: &Graph,
    model: &GnnModel,
    v: NodeId,
    spec: &MeasureSpec,
    guard: usize,
) -> Result<Vec<(Vec<EdgeId>, Assessment)>> {
    let mut cfg = QueryConfig::new(v);
    cfg.spec = spec.clone();
    brute_force_space_with(&ModelEvaluator::new(g, model, &cfg)?, guard)
}

/// Dominance power of a set of points, with dominance sets recomputed
/// pairwise. A point does not count toward its own set.
pub fn ds_objective(points: &[Vec<f64>], eps: f64) -> impl Fn(&[usize]) -> f64 + '_ {
    move |set: &[usize]| {
        (0..points.len())
            .filter(|&j| {
                set.iter()
                    .any(|&i| i != j && eps_dominates(&points[j], &points[i], eps))
            })
            .count() as f64
    }
}

/// Best subset of at most `k` points with no internally dominated pair,
/// maximizing `objective`. Ties keep the first subset found in increasing size,
/// then lexicographic order. The empty set scores 0.
pub fn brute_force_optimal(
    points: &[Vec<f64>],
    k: usize,
    objective: impl Fn(&[usize]) -> f64,
) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    let visits: u128 = (1..=k.min(n)).map(|r| binomial(n, r)).sum();
    if visits > SUBSET_LIMIT {
        return Err(Error::GuardExceeded { edges: n, guard: k });
    }
    let mut best = (Vec::new(), 0.0);
    let mut set = Vec::with_capacity(k);
    for size in 1..=k.min(n) {
        search(points, size, 0, &mut set, &objective, &mut best);
    }
    Ok(best)
}

fn search(
    points: &[Vec<f64>],
    size: usize,
    from: usize,
    set: &mut Vec<usize>,
    objective: &impl Fn(&[usize]) -> f64,
    best: &mut (Vec<usize>, f64),
) {
    if set.len() == size {
        let score = objective(set);
        if score > best.1 {
            *best = (set.clone(), score);
        }
        return;
    }
    for i in from..points.len() {
        if set
            .iter()
            .any(|&j| dominates(&points[i], &points[j]) || dominates(&points[j], &points[i]))
        {
            continue;
        }
        set.push(i);
        search(points, size, i + 1, set, objective, best);
        set.pop();
    }
}

fn binomial(n: usize, r: usize) -> u128 {
    (0..r as u128).fold(1, |acc, i| acc * (n as u128 - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutually_incomparable_space_is_optimal_whole() {
        let points = vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.1, 0.9]];
        let (set, _) = brute_force_optimal(&points, 3, |s: &[usize]| s.len() as f64).unwrap();
        assert_eq!(set, vec![0, 1, 2]);
    }

    #[test]
    fn singleton_with_largest_power() {
        let points = vec![
            vec![0.2, 0.2],
            vec![0.6, 0.6],
            vec![0.3, 0.1],
            vec![0.9, 0.05],
        ];
        let objective = ds_objective(&points, 0.0);
        let (set, score) = brute_force_optimal(&points, 1, &objective).unwrap();
        assert_eq!((set, score), (vec![1], 2.0));
    }

    #[test]
    fn dominated_pairs_are_never_chosen() {
        let points = vec![vec![0.2, 0.2], vec![0.6, 0.6]];
        let (set, _) = brute_force_optimal(&points, 2, |s: &[usize]| s.len() as f64).unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(15, 3), 455);
        assert_eq!(binomial(5, 0), 1);
    }
}
