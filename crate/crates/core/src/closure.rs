//! The closure `Cₛ`, update `Uₛ`, their composite `UCₛ`, and `θₛ`.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::formula::{Cmp, StateFormula};
use crate::markov::StateId;
use crate::modelcheck::Checker;

pub type FormulaSet = BTreeSet<StateFormula>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClosureError {
    #[error("state `{state}` does not satisfy `{formula}`")]
    Unsatisfied { state: String, formula: StateFormula },
}

fn require(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> Result<(), ClosureError> {
    match c.first_violation(s, xs) {
        None => Ok(()),
        Some(f) => Err(ClosureError::Unsatisfied { state: c.chain().name(s).into(), formula: f.clone() }),
    }
}

/// Least superset of `X` closed under: satisfied disjuncts, all conjuncts,
/// and the body of `F▷r φ` when `s ⊨ φ`. Bodies under `G` are not unfolded.
pub fn closure(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> Result<FormulaSet, ClosureError> {
    require(c, s, xs)?;
    Ok(closure_unchecked(c, s, xs))
}

fn closure_unchecked(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> FormulaSet {
    let mut out = xs.clone();
    let mut work: Vec<StateFormula> = xs.iter().cloned().collect();
    while let Some(f) = work.pop() {
        let add: Vec<&StateFormula> = match &f {
            StateFormula::And(parts) => parts.iter().collect(),
            StateFormula::Or(parts) => parts.iter().filter(|p| c.holds(s, p)).collect(),
            StateFormula::Prob(path, _, _) if path.op == crate::formula::PathOp::F => {
                if c.holds(s, &path.body) {
                    alloc::vec![&path.body]
                } else {
                    Vec::new()
                }
            }
            _ => Vec::new(),
        };
        for g in add {
            if out.insert(g.clone()) {
                work.push(g.clone());
            }
        }
    }
    out
}

/// Replaces every `P(Φ)▷r` by `P(Φ) ≥ P_s(Φ)`.
pub fn update(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> Result<FormulaSet, ClosureError> {
    require(c, s, xs)?;
    Ok(update_unchecked(c, s, xs))
}

fn update_unchecked(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> FormulaSet {
    xs.iter()
        .map(|f| match f {
            StateFormula::Prob(path, _, _) => {
                // s ⊨ f, so the value is positive and the new bound non-trivial.
                StateFormula::prob_unchecked((**path).clone(), Cmp::Ge, c.prob(s, path))
            }
            other => other.clone(),
        })
        .collect()
}

/// `UCₛ(X) = Uₛ(Cₛ(X))`.
pub fn uc(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> Result<FormulaSet, ClosureError> {
    let k = closure(c, s, xs)?;
    Ok(update_unchecked(c, s, &k))
}

/// `P(Φ) ≥ P_t(Φ)` for each probabilistic member with positive probability at `t`.
pub fn theta(c: &Checker<'_>, t: StateId, xs: &FormulaSet) -> FormulaSet {
    xs.iter()
        .filter_map(|f| {
            let (path, _, _) = f.as_prob()?;
            let p = c.prob(t, path);
            (!p.is_zero()).then(|| StateFormula::prob_unchecked(path.clone(), Cmp::Ge, p))
        })
        .collect()
}
