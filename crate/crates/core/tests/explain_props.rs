mod common;

use common::{running_example, small_instance, Recording};
use proptest::prelude::*;
use skyx_core::explain::{
    asx_insert_with, asx_op_with, EdgeInfoTable, Evaluator, ModelEvaluator, QueryConfig, Strategy,
};
use skyx_core::{
    dominates, is_connected_with_anchor, Graph, Measure, MeasureSpec, StateGraph, Subgraph,
};

fn config(target: usize, k: usize, eps: f64) -> QueryConfig {
    let mut cfg = QueryConfig::new(target);
    cfg.k = k;
    cfg.epsilon = eps;
    cfg
}

/// Onion peeling without prioritization, recomputed from its definition:
/// peel layers outermost first, try every removable edge, commit the lowest.
fn plain_peeling_schedule(g: &Graph, eval: &impl Evaluator) -> Vec<Vec<usize>> {
    let nb = eval.neighborhood();
    let mut current = nb.edges.clone();
    let mut visited = Vec::new();
    let mut carry: Vec<usize> = Vec::new();
    for layer in nb.layers(g).into_iter().rev() {
        let mut pending: Vec<usize> = layer.into_iter().chain(carry.drain(..)).collect();
        pending.sort_unstable();
        loop {
            let removable: Vec<usize> = pending
                .iter()
                .copied()
                .filter(|&e| {
                    let rest: Vec<usize> = current.iter().copied().filter(|&x| x != e).collect();
                    current.len() > 1 && is_connected_with_anchor(g, &rest, nb.center)
                })
                .collect();
            let Some(&first) = removable.first() else {
                break;
            };
            for &e in &removable {
                visited.push(current.iter().copied().filter(|&x| x != e).collect());
            }
            current.retain(|&x| x != first);
            pending.retain(|&x| x != first);
        }
        carry = pending;
    }
    visited
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn verifier_only_sees_valid_subgraphs(seed in any::<u64>(), insert in any::<bool>()) {
        let inst = small_instance(seed, 12);
        let mut cfg = config(inst.target, 3, 0.1);
        cfg.strategy = if insert { Strategy::EdgeGrow } else { Strategy::OnionPeel };
        let eval = Recording::new(ModelEvaluator::new(&inst.graph, &inst.model, &cfg).unwrap());
        let out = skyx_core::explain::explain_with(&eval, &cfg, &mut EdgeInfoTable::new()).unwrap();
        for c in eval.calls.borrow().iter() {
            prop_assert!(Subgraph::new(&inst.graph, c.clone(), inst.target).is_ok(), "{c:?}");
        }
        for s in out.states.states() {
            let again = eval.inner.assess(&s.edges).unwrap();
            prop_assert_eq!(again.kind, Some(s.kind));
            prop_assert_eq!(&again.phi, &s.phi);
        }
        for &a in &out.explanation.members {
            for &b in &out.explanation.members {
                prop_assert!(!dominates(&out.states.state(a).phi, &out.states.state(b).phi));
            }
        }
    }

    #[test]
    fn unprioritized_peeling_replays_offline(seed in any::<u64>(), k in 1usize..4, eps in prop_oneof![Just(0.0), Just(0.1), Just(0.5)]) {
        let inst = small_instance(seed, 12);
        let mut cfg = config(inst.target, k, eps);
        cfg.prioritize = false;
        cfg.max_candidates = usize::MAX;
        let eval = Recording::new(ModelEvaluator::new(&inst.graph, &inst.model, &cfg).unwrap());
        let out = asx_op_with(&eval, &cfg, &mut EdgeInfoTable::new()).unwrap();
        let calls = eval.calls.borrow().clone();
        prop_assert_eq!(&calls, &plain_peeling_schedule(&inst.graph, &eval.inner));
        let mut replay = StateGraph::new(k, eps).unwrap();
        for c in &calls {
            let a = eval.inner.assess(c).unwrap();
            if let Some(kind) = a.kind {
                replay.update_sx(c.clone(), kind, a.raw, a.phi);
            }
        }
        prop_assert_eq!(replay.explanation(), out.states.explanation());
        prop_assert_eq!(replay.dominance_power(replay.explanation()), out.explanation.dominance_power);
    }

    #[test]
    fn pruned_candidates_stay_within_the_certificate(seed in any::<u64>(), eps in prop_oneof![Just(0.1), Just(0.5), Just(1.0)]) {
        let inst = small_instance(seed, 12);
        let truth: Vec<usize> = (0..inst.graph.node_count()).filter(|v| v % 2 == 0).collect();
        let g = inst.graph.clone().with_ground_truth(truth).unwrap();
        let mut cfg = config(inst.target, 2, eps);
        cfg.spec = MeasureSpec::parse("conc,acc").unwrap();
        let eval = ModelEvaluator::new(&g, &inst.model, &cfg).unwrap();
        let full = asx_op_with(&eval, &cfg, &mut EdgeInfoTable::new()).unwrap();
        cfg.monotone = vec![Measure::Conciseness, Measure::Accuracy];
        let pruned = asx_op_with(&eval, &cfg, &mut EdgeInfoTable::new()).unwrap();
        let n = pruned.states.len();
        for (a, b) in pruned.states.states().iter().zip(full.states.states()) {
            prop_assert_eq!(&a.edges, &b.edges);
        }
        if let Some(at) = &pruned.stats.pruned_at {
            let certified = eval.assess(at).unwrap().phi;
            for skipped in &full.states.states()[n..] {
                for (x, y) in skipped.phi.iter().zip(certified.iter()) {
                    prop_assert!(*x <= (1.0 + eps) * y + 1e-12, "{:?} vs {:?}", skipped.phi, certified);
                }
            }
        } else {
            prop_assert_eq!(n, full.states.len());
        }
    }

    #[test]
    fn edge_growing_reaches_the_whole_neighborhood(seed in any::<u64>()) {
        let inst = small_instance(seed, 12);
        let mut cfg = config(inst.target, 3, 0.1);
        cfg.max_candidates = usize::MAX;
        let eval = Recording::new(ModelEvaluator::new(&inst.graph, &inst.model, &cfg).unwrap());
        asx_insert_with(&eval, &cfg, &mut EdgeInfoTable::new()).unwrap();
        let calls = eval.calls.borrow();
        let mut last = calls.last().unwrap().clone();
        last.sort_unstable();
        prop_assert_eq!(last, eval.inner.neighborhood().edges.clone());
        for pair in calls.windows(2) {
            prop_assert!(pair[1].len() >= pair[0].len());
        }
    }
}

#[test]
fn running_example_trace() {
    let eval = running_example();
    let cfg = config(0, 2, 0.5);
    let out = asx_op_with(&eval, &cfg, &mut EdgeInfoTable::new()).unwrap();
    let visited = eval.assessed.borrow().clone();
    assert_eq!(
        visited,
        vec![vec![1, 2], vec![0, 2], vec![0, 1], vec![2], vec![1]]
    );
    let members: Vec<Vec<usize>> = out
        .explanation
        .members
        .iter()
        .map(|&m| out.states.state(m).edges.clone())
        .collect();
    assert_eq!(members, vec![vec![0, 2], vec![1]]);
    assert_eq!(out.explanation.dominance_power, 4);
    assert_eq!(out.states.len(), 4);
    // transitions hang off the root, then off the committed state {e1, e2}
    let t = out.states.transitions();
    assert_eq!(t.len(), 4);
    assert!(t[..3].iter().all(|t| t.from.is_none()));
    assert_eq!(t[3].from, Some(0));
}

#[test]
fn budget_stops_the_run() {
    let eval = running_example();
    let mut cfg = config(0, 2, 0.5);
    cfg.max_candidates = 2;
    let out = asx_op_with(&eval, &cfg, &mut EdgeInfoTable::new()).unwrap();
    assert!(out.stats.budget_exhausted);
    assert_eq!(out.stats.verifier_calls, 2);
    assert_eq!(out.states.len(), 2);
}
