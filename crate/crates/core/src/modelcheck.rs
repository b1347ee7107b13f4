//! Exact model checking of core formulae on finite chains.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cell::RefCell;

use num_traits::One;

use crate::formula::{PathFormula, PathOp, StateFormula};
use crate::markov::{ChainError, MarkovChain, StateId};
use crate::rational::Rational;

/// Memoizing checker bound to one chain. The memo lives as long as the
/// checker and is never shared.
pub struct Checker<'a> {
    chain: &'a MarkovChain,
    sat: RefCell<BTreeMap<StateFormula, Vec<bool>>>,
    probs: RefCell<BTreeMap<PathFormula, Vec<Rational>>>,
}

impl<'a> Checker<'a> {
    pub fn new(chain: &'a MarkovChain) -> Self {
        Checker { chain, sat: RefCell::default(), probs: RefCell::default() }
    }

    pub fn chain(&self) -> &'a MarkovChain {
        self.chain
    }

    /// Satisfaction vector indexed by state.
    pub fn sat(&self, phi: &StateFormula) -> Vec<bool> {
        if let Some(v) = self.sat.borrow().get(phi) {
            return v.clone();
        }
        let m = self.chain;
        let v: Vec<bool> = match phi {
            StateFormula::Atom(a) => m.states().map(|s| m.has_label(s, a)).collect(),
            StateFormula::NegAtom(a) => m.states().map(|s| !m.has_label(s, a)).collect(),
            StateFormula::And(xs) => {
                let mut acc = alloc::vec![true; m.len()];
                for x in xs {
                    acc.iter_mut().zip(self.sat(x)).for_each(|(a, b)| *a &= b);
                }
                acc
            }
            StateFormula::Or(xs) => {
                let mut acc = alloc::vec![false; m.len()];
                for x in xs {
                    acc.iter_mut().zip(self.sat(x)).for_each(|(a, b)| *a |= b);
                }
                acc
            }
            StateFormula::Prob(path, cmp, r) => {
                self.path_probs(path).iter().map(|p| cmp.holds(p, r)).collect()
            }
        };
        self.sat.borrow_mut().insert(phi.clone(), v.clone());
        v
    }

    pub fn sat_set(&self, phi: &StateFormula) -> BTreeSet<StateId> {
        self.sat(phi).into_iter().enumerate().filter(|(_, b)| *b).map(|(s, _)| s).collect()
    }

    pub fn holds(&self, s: StateId, phi: &StateFormula) -> bool {
        self.sat(phi)[s]
    }

    /// `P_s(Φ)` for every state `s`.
    pub fn path_probs(&self, path: &PathFormula) -> Vec<Rational> {
        if let Some(v) = self.probs.borrow().get(path) {
            return v.clone();
        }
        let body = self.sat(&path.body);
        let v = path_probabilities(self.chain, path.op, &body);
        self.probs.borrow_mut().insert(path.clone(), v.clone());
        v
    }

    pub fn prob(&self, s: StateId, path: &PathFormula) -> Rational {
        self.path_probs(path)[s].clone()
    }

    /// `s ⊨ X`.
    pub fn check<'f>(&self, s: StateId, xs: impl IntoIterator<Item = &'f StateFormula>) -> bool {
        self.first_violation(s, xs).is_none()
    }

    pub fn first_violation<'f>(
        &self,
        s: StateId,
        xs: impl IntoIterator<Item = &'f StateFormula>,
    ) -> Option<&'f StateFormula> {
        xs.into_iter().find(|x| !self.holds(s, x))
    }
}

/// Probability of `op body` from every state, given the exact satisfaction
/// vector of the body. `G` is computed as one minus reaching a violation.
pub fn path_probabilities(m: &MarkovChain, op: PathOp, body: &[bool]) -> Vec<Rational> {
    match op {
        PathOp::F => m.reach_probabilities(body),
        PathOp::G => {
            let bad: Vec<bool> = body.iter().map(|b| !b).collect();
            m.reach_probabilities(&bad).into_iter().map(|p| Rational::one() - p).collect()
        }
    }
}

/// `P_s(Φ)` where `sat_body` is the satisfaction set of `Φ`'s body.
pub fn prob(
    m: &MarkovChain,
    s: StateId,
    op: PathOp,
    sat_body: &BTreeSet<StateId>,
) -> Result<Rational, ChainError> {
    m.check_state(s)?;
    let body: Vec<bool> = m.states().map(|t| sat_body.contains(&t)).collect();
    Ok(path_probabilities(m, op, &body).swap_remove(s))
}

pub fn sat_set(m: &MarkovChain, phi: &StateFormula) -> BTreeSet<StateId> {
    Checker::new(m).sat_set(phi)
}

pub fn check<'f>(m: &MarkovChain, s: StateId, xs: impl IntoIterator<Item = &'f StateFormula>) -> bool {
    Checker::new(m).check(s, xs)
}
