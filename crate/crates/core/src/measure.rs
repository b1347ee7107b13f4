//! The progress measure `‖X‖ₛ` and its ingredients.

use alloc::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, Pow};

use crate::closure::FormulaSet;
use crate::formula::{formula_sets, proper_sub_union, PathFormula, PathOp, StateFormula};
use crate::markov::StateId;
use crate::modelcheck::Checker;
use crate::rational::Rational;

/// `‖Φ‖ = 1 + Σ ‖Ψ‖` over the outermost path formulae `Ψ` of `Φ`'s body.
pub fn path_norm(path: &PathFormula) -> usize {
    1 + path.body.top_paths().iter().map(path_norm).sum::<usize>()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuxSets {
    pub deg: BTreeSet<PathFormula>,
    pub cf: BTreeSet<PathFormula>,
    pub b: usize,
}

fn g_almost_sure(c: &Checker<'_>, s: StateId, body: &StateFormula) -> bool {
    c.prob(s, &PathFormula::always(body.clone())).is_one()
}

/// `G φ ∈ psub(X)` with `s ⊭ G=1 φ`.
pub fn deg(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> BTreeSet<PathFormula> {
    formula_sets(xs).psub.into_iter().filter(|p| p.op == PathOp::G && !g_almost_sure(c, s, &p.body)).collect()
}

/// `F φ` with `F▷r φ ∈ X`, `s ⊭ φ`, and a path from `s` to some `t ⊨ φ`
/// at which no `G=1 ψ` with `G ψ ∈ deg` holds.
pub fn cf(
    c: &Checker<'_>,
    s: StateId,
    xs: &FormulaSet,
    deg: &BTreeSet<PathFormula>,
) -> BTreeSet<PathFormula> {
    let m = c.chain();
    let reach = m.reachable_from(s);
    let degenerate: alloc::vec::Vec<alloc::vec::Vec<bool>> = deg
        .iter()
        .map(|g| {
            let v = c.path_probs(g);
            v.iter().map(Rational::is_one).collect()
        })
        .collect();
    xs.iter()
        .filter_map(|x| x.as_prob())
        .filter(|(p, _, _)| p.op == PathOp::F && !c.holds(s, &p.body))
        .filter(|(p, _, _)| {
            let sat = c.sat(&p.body);
            m.states().any(|t| reach[t] && sat[t] && degenerate.iter().all(|d| !d[t]))
        })
        .map(|(p, _, _)| p.clone())
        .collect()
}

/// `2 + |nsub(X)| + |psub(X)| + |⋃ sub(φ) ∖ {φ}|`.
pub fn b_value(xs: &FormulaSet) -> usize {
    let sets = formula_sets(xs);
    2 + sets.nsub.len() + sets.psub.len() + proper_sub_union(xs).len()
}

pub fn aux_sets(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> AuxSets {
    let deg = deg(c, s, xs);
    let cf = cf(c, s, xs, &deg);
    AuxSets { deg, cf, b: b_value(xs) }
}

/// `1 + |deg|·(1 + Σ_{Φ∈psub} ‖Φ‖) + Σ_{Φ∈cf} ‖Φ‖`, with the first sum over
/// the outermost path formulae of `X`.
pub fn measure(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> usize {
    let aux = aux_sets(c, s, xs);
    let psub_sum: usize = formula_sets(xs).top_psub.iter().map(path_norm).sum();
    let cf_sum: usize = aux.cf.iter().map(path_norm).sum();
    1 + aux.deg.len() * (1 + psub_sum) + cf_sum
}

/// `2^b · (b^(m+1) − 1)/(b − 1)`, the state bound for a set with `b(X) = b`
/// and `‖X‖ = m`. Requires `b ≥ 2`.
pub fn size_bound(b: usize, m: usize) -> BigUint {
    assert!(b >= 2, "b(X) is at least 2");
    let two = BigUint::from(2u32);
    let bb = BigUint::from(b);
    let geometric = (Pow::pow(&bb, m + 1) - BigUint::one()) / (&bb - BigUint::one());
    Pow::pow(&two, b) * geometric
}
