//! Dominance tests, the state graph of verified candidates and the
//! swap-based maintenance of a size-k explanation.

use bitvec::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::EdgeId;
use crate::measures::{MeasureVector, VerifiedKind};

pub type StateId = usize;

/// True iff `b` dominates `a`: at least as good everywhere, better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).all(|(x, y)| y >= x) && a.iter().zip(b).any(|(x, y)| y > x)
}

/// True iff `b` is at least as good as `a` in every measure.
pub fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).all(|(x, y)| y >= x)
}

/// True iff `a` is (1+ε)-dominated by `b`: `a ≤ (1+ε)·b` everywhere and
/// `a ≤ b` somewhere.
pub fn eps_dominates(a: &[f64], b: &[f64], eps: f64) -> bool {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).all(|(x, y)| *x <= (1.0 + eps) * y) && a.iter().zip(b).any(|(x, y)| x <= y)
}

/// Cell of the (1+ε) log grid: `⌊log_{1+ε} φ⌋` per measure.
// negated comparisons also reject NaN
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn grid_index(phi: &[f64], eps: f64) -> Result<Vec<i64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("grid needs ε > 0, got {eps}")));
    }
    if let Some(x) = phi.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "grid needs positive coordinates, got {x}"
        )));
    }
    let base = (1.0 + eps).ln();
    Ok(phi.iter().map(|x| (x.ln() / base).floor() as i64).collect())
}

/// The swap rule: `candidate > (1 + 1/k)·current`, evaluated in integers.
pub fn swap_improves(current: usize, candidate: usize, k: usize) -> bool {
    candidate * k > current * (k + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub id: StateId,
    /// Sorted edge ids of the candidate.
    pub edges: Vec<EdgeId>,
    pub kind: VerifiedKind,
    pub raw: Vec<f64>,
    pub phi: MeasureVector,
    /// Log-grid cell; absent when ε = 0.
    pub grid: Option<Vec<i64>>,
    /// Bit `i` is set iff state `i` is (1+ε)-dominated by this state.
    pub bits: BitVec,
    dominated_by: usize,
}

impl State {
    /// Number of states this one (1+ε)-dominates.
    pub fn ds(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn dominates_state(&self, other: StateId) -> bool {
        self.bits.get(other).is_some_and(|b| *b)
    }
}

/// One generation step: `to` was spawned from `from` by editing `edge`.
/// `from` is `None` when the parent candidate is not itself a verified state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub from: Option<StateId>,
    pub to: StateId,
    pub edge: EdgeId,
}

/// Verified candidates of one query, their (1+ε)-dominance relation, the
/// non-dominated frontier and the maintained explanation.
#[derive(Debug, Clone)]
pub struct StateGraph {
    k: usize,
    eps: f64,
    states: Vec<State>,
    transitions: Vec<Transition>,
    explanation: Vec<StateId>,
}

impl StateGraph {
    pub fn new(k: usize, eps: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidConfig(format!("ε = {eps} outside [0, 1]")));
        }
        Ok(Self {
            k,
            eps,
            states: Vec::new(),
            transitions: Vec::new(),
            explanation: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &State {
        &self.states[id]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Member ids of the current explanation, in admission order.
    pub fn explanation(&self) -> &[StateId] {
        &self.explanation
    }

    /// States not (1+ε)-dominated by any other state.
    pub fn frontier(&self) -> Vec<StateId> {
        self.states
            .iter()
            .filter(|s| s.dominated_by == 0)
            .map(|s| s.id)
            .collect()
    }

    pub fn is_frontier(&self, id: StateId) -> bool {
        self.states[id].dominated_by == 0
    }

    pub fn add_transition(&mut self, transition: Transition) {
        self.transitions.push(transition);
    }

    /// Size of the union of the members' dominance sets.
    pub fn dominance_power(&self, ids: &[StateId]) -> usize {
        let mut union: BitVec = BitVec::repeat(false, self.states.len());
        for &id in ids {
            let bits = &self.states[id].bits;
            union[..bits.len()] |= bits.as_bitslice();
        }
        union.count_ones()
    }

    /// Appends a verified state and records (1+ε)-dominance in both directions.
    pub fn insert(
        &mut self,
        mut edges: Vec<EdgeId>,
        kind: VerifiedKind,
        raw: Vec<f64>,
        phi: MeasureVector,
    ) -> StateId {
        edges.sort_unstable();
        let id = self.states.len();
        let mut bits: BitVec = BitVec::repeat(false, id + 1);
        let mut dominated_by = 0;
        for other in &mut self.states {
            if eps_dominates(&other.phi, &phi, self.eps) {
                bits.set(other.id, true);
                other.dominated_by += 1;
            }
            if eps_dominates(&phi, &other.phi, self.eps) {
                if other.bits.len() <= id {
                    other.bits.resize(id + 1, false);
                }
                other.bits.set(id, true);
                dominated_by += 1;
            }
        }
        let grid = (self.eps > 0.0)
            .then(|| grid_index(&phi, self.eps).ok())
            .flatten();
        self.states.push(State {
            id,
            edges,
            kind,
            raw,
            phi,
            grid,
            bits,
            dominated_by,
        });
        id
    }

    /// A state qualifies for the explanation unless some other state is at
    /// least as good in every measure. Exact duplicates of an earlier state
    /// therefore never qualify.
    pub fn admits(&self, id: StateId) -> bool {
        let phi = &self.states[id].phi;
        !self
            .states
            .iter()
            .any(|other| other.id != id && weakly_dominates(phi, &other.phi))
    }

    /// Drops members that `id` dominates.
    pub(crate) fn evict_dominated_by(&mut self, id: StateId) {
        let phi = self.states[id].phi.clone();
        let states = &self.states;
        self.explanation
            .retain(|&m| !dominates(&states[m].phi, &phi));
    }

    pub(crate) fn push_member(&mut self, id: StateId) {
        self.explanation.push(id);
    }

    /// Records a verified candidate and updates the explanation: admit while
    /// there is room, otherwise swap out the member with the smallest
    /// dominance set if that grows the explanation's dominance power by more
    /// than a factor 1 + 1/k.
    pub fn update_sx(
        &mut self,
        edges: Vec<EdgeId>,
        kind: VerifiedKind,
        raw: Vec<f64>,
        phi: MeasureVector,
    ) -> StateId {
        let id = self.insert(edges, kind, raw, phi);
        if !self.admits(id) {
            return id;
        }
        self.evict_dominated_by(id);
        if self.explanation.len() < self.k {
            self.explanation.push(id);
            return id;
        }
        let (slot, _) = self
            .explanation
            .iter()
            .enumerate()
            .min_by_key(|&(_, &m)| (self.states[m].ds(), m))
            .expect("explanation is full, so non-empty");
        let current = self.dominance_power(&self.explanation);
        let mut swapped = self.explanation.clone();
        swapped[slot] = id;
        let candidate = self.dominance_power(&swapped);
        if swap_improves(current, candidate, self.k) {
            log::trace!(
                "swap {} -> {id}: power {current} -> {candidate}",
                self.explanation[slot]
            );
            self.explanation.remove(slot);
            self.explanation.push(id);
        }
        id
    }

    /// Graphviz rendering of the transition DAG; explanation members are boxed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph states {\n  root [shape=point];\n");
        for s in &self.states {
            let shape = if self.explanation.contains(&s.id) {
                "box"
            } else {
                "ellipse"
            };
            let coords: Vec<String> = s.phi.iter().map(|x| format!("{x:.3}")).collect();
            out += &format!(
                "  s{} [shape={shape}, label=\"s{} ({}) ds={}\"];\n",
                s.id,
                s.id,
                coords.join(", "),
                s.ds()
            );
        }
        for t in &self.transitions {
            let from = t
                .from
                .map_or_else(|| "root".to_string(), |f| format!("s{f}"));
            out += &format!("  {from} -> s{} [label=\"e{}\"];\n", t.to, t.edge);
        }
        out.push_str("}\n");
        out
    }
}
