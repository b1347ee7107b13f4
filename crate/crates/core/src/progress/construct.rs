//! Building chains: the loop of a progress loop with its exit submodels,
//! and the reduction of a bottom SCC to one state per satisfaction class.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{One, Signed};

use super::ProgressLoop;
use crate::closure::FormulaSet;
use crate::formula::{formula_sets, PathOp, StateFormula};
use crate::markov::{MarkovChain, SccDecomposition, StateId};
use crate::modelcheck::Checker;
use crate::rational::{ratio, Rational};

/// A chain to be attached after the exit state, entered at `entry` with
/// relative weight `weight`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submodel {
    pub chain: MarkovChain,
    pub entry: StateId,
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoopModelError {
    #[error("loop has no sets")]
    EmptyLoop,
    #[error("no loop set contains X")]
    NoEntry,
    #[error("submodel weights sum to {0}, not 1")]
    WeightSum(Rational),
    #[error("epsilon {0} is not in (0,1)")]
    EpsilonOutOfRange(Rational),
    #[error("state name `{0}` occurs twice after renaming")]
    NameCollision(String),
}

/// `(max R + 1)/2` where `R` holds the bounds `r < 1` of the `F▷r` formulae
/// in the loop, or `1/2` when there are none.
pub fn epsilon_for(l: &ProgressLoop) -> Rational {
    let max = l
        .union()
        .iter()
        .filter_map(|f| f.as_prob())
        .filter(|(p, _, r)| p.op == PathOp::F && !r.is_one())
        .map(|(_, _, r)| r.clone())
        .max();
    match max {
        Some(r) => (r + Rational::one()) / Rational::from_integer(2.into()),
        None => ratio(1, 2),
    }
}

/// Loop states `l0 … ln` labelled by their positive atoms, `lᵢ → lᵢ₊₁` with
/// probability 1, and `ln → l0` with `ε`, `ln → entryₖ` with `(1−ε)·weightₖ`.
/// Submodels whose names clash with names already taken get the prefix
/// `m<k>.`. Returns the chain and the first loop state containing `X`.
pub fn build_loop_model(
    l: &ProgressLoop,
    xs: &FormulaSet,
    submodels: &[Submodel],
    epsilon: Option<Rational>,
) -> Result<(MarkovChain, StateId), LoopModelError> {
    if l.is_empty() {
        return Err(LoopModelError::EmptyLoop);
    }
    let entry = l.entry_index(xs).ok_or(LoopModelError::NoEntry)?;
    let total: Rational = submodels.iter().map(|s| s.weight.clone()).sum();
    if !total.is_one() || submodels.iter().any(|s| !s.weight.is_positive()) {
        return Err(LoopModelError::WeightSum(total));
    }
    let eps = epsilon.unwrap_or_else(|| epsilon_for(l));
    if !eps.is_positive() || eps >= Rational::one() {
        return Err(LoopModelError::EpsilonOutOfRange(eps));
    }

    let mut b = MarkovChain::builder();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let n = l.len();
    for (i, li) in l.sets.iter().enumerate() {
        let name = alloc::format!("l{}", i);
        let atoms = li.iter().filter_map(|f| match f {
            StateFormula::Atom(a) => Some(a.clone()),
            _ => None,
        });
        b.add_state(&name, atoms);
        taken.insert(name);
    }
    let mut offsets = Vec::new();
    for (k, sm) in submodels.iter().enumerate() {
        let clash = sm.chain.names().iter().any(|x| taken.contains(x));
        let chain = if clash { sm.chain.with_prefix(&alloc::format!("m{}.", k)) } else { sm.chain.clone() };
        let offset = taken.len();
        for q in chain.states() {
            let name = chain.name(q);
            if !taken.insert(name.into()) {
                return Err(LoopModelError::NameCollision(name.into()));
            }
            b.add_state(name, chain.labels(q).iter().cloned());
        }
        for q in chain.states() {
            for (r, p) in chain.successors(q) {
                b.add_edge_ids(offset + q, offset + r, p.clone());
            }
        }
        offsets.push(offset);
    }
    for i in 0..n - 1 {
        b.add_edge_ids(i, i + 1, Rational::one());
    }
    b.add_edge_ids(n - 1, 0, eps.clone());
    let exit = Rational::one() - &eps;
    for (sm, off) in submodels.iter().zip(&offsets) {
        b.add_edge_ids(n - 1, off + sm.entry, &exit * &sm.weight);
    }
    let chain = b.build().expect("loop model rows sum to one");
    Ok((chain, entry))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BsccError {
    #[error("state `{0}` is not in a bottom SCC")]
    NotBottom(String),
    #[error("state does not satisfy `{0}`")]
    Unsatisfied(StateFormula),
    #[error("reduced chain fails `{0}` at its entry")]
    Verification(StateFormula),
}

/// Collapses the bottom SCC of `t` to a deterministic cycle with one state
/// per distinct truth vector over `sub(X)`, entered at the class of `t`.
pub fn bscc_reduce(
    c: &Checker<'_>,
    t: StateId,
    xs: &FormulaSet,
) -> Result<(MarkovChain, StateId), BsccError> {
    let m = c.chain();
    let scc = SccDecomposition::new(m);
    if !scc.in_bottom(t) {
        return Err(BsccError::NotBottom(m.name(t).into()));
    }
    if let Some(f) = c.first_violation(t, xs) {
        return Err(BsccError::Unsatisfied(f.clone()));
    }
    let sub: Vec<StateFormula> = formula_sets(xs).sub.into_iter().collect();
    let sats: Vec<Vec<bool>> = sub.iter().map(|f| c.sat(f)).collect();
    let signature = |q: StateId| -> Vec<bool> { sats.iter().map(|v| v[q]).collect() };
    let mut members = scc.components[scc.component_of[t]].clone();
    members.retain(|&q| q != t);
    members.insert(0, t);
    let mut reps: BTreeMap<Vec<bool>, StateId> = BTreeMap::new();
    let mut order = Vec::new();
    for q in members {
        if let alloc::collections::btree_map::Entry::Vacant(e) = reps.entry(signature(q)) {
            e.insert(q);
            order.push(q);
        }
    }
    let mut b = MarkovChain::builder();
    for &q in &order {
        b.add_state(m.name(q), m.labels(q).iter().cloned());
    }
    for i in 0..order.len() {
        b.add_edge_ids(i, (i + 1) % order.len(), Rational::one());
    }
    let chain = b.build().expect("a cycle is a valid chain");
    let check = Checker::new(&chain);
    if let Some(f) = check.first_violation(0, xs) {
        return Err(BsccError::Verification(f.clone()));
    }
    Ok((chain, 0))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeViolation {
    /// A transient state on no cycle.
    Trivial(String),
    /// A state with more than one successor inside its component.
    Branching(String),
    /// A component left from more than one state.
    MultipleExits(Vec<String>),
}

/// Checks that every non-bottom SCC is a simple cycle left from exactly one
/// state.
pub fn check_loop_shape(m: &MarkovChain) -> Result<(), Vec<ShapeViolation>> {
    let scc = SccDecomposition::new(m);
    let mut out = Vec::new();
    for (ci, comp) in scc.components.iter().enumerate() {
        if scc.is_bottom[ci] {
            continue;
        }
        let inside = |q: &StateId| scc.component_of[*q] == ci;
        let mut exits = Vec::new();
        for &q in comp {
            let internal = m.successors(q).iter().filter(|(r, _)| inside(r)).count();
            if internal == 0 {
                out.push(ShapeViolation::Trivial(m.name(q).into()));
            } else if internal > 1 {
                out.push(ShapeViolation::Branching(m.name(q).into()));
            }
            if m.successors(q).iter().any(|(r, _)| !inside(r)) {
                exits.push(String::from(m.name(q)));
            }
        }
        if exits.len() > 1 {
            out.push(ShapeViolation::MultipleExits(exits));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
