//! Membership in the four progressive fragments.
//!
//! `▷r` is any core constraint; `▷w` is any core constraint except `=1`.
//!
//! ```text
//! L1  φ ::= a | ¬a | φ∧φ | φ∨φ | F▷r φ | G▷r ψ
//!     ψ ::= a | ¬a | ψ∧ψ | ψ∨ψ | G▷r ψ
//! L2  φ ::= a | ¬a | φ∧φ | φ∨φ | F▷r φ | G=1 ψ
//!     ψ ::= a | ¬a | ψ∧ψ | ψ∨ψ | F▷w ψ
//! L3  φ ::= a | ¬a | φ∧φ | φ∨φ | F▷r φ | G=1 ψ | G=1 ϱ
//!     ψ ::= as in L2
//!     ϱ ::= ϱ∧ϱ | ϱ∨ϱ | F▷w ψ | G=1 ψ | G=1 ϱ
//! L4  φ ::= a | ¬a | φ∧φ | φ∨φ | F▷r φ | G=1 ψ
//!     ψ ::= a | ¬a | ψ∧ψ | ψ∨ψ | F>0 ψ | G=1 ψ
//! ```

use num_traits::Zero;

use super::{Cmp, PathOp, StateFormula};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fragment {
    L1,
    L2,
    L3,
    L4,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FragmentMembership {
    pub in_l1: bool,
    pub in_l2: bool,
    pub in_l3: bool,
    pub in_l4: bool,
}

impl FragmentMembership {
    pub fn contains(&self, fragment: Fragment) -> bool {
        match fragment {
            Fragment::L1 => self.in_l1,
            Fragment::L2 => self.in_l2,
            Fragment::L3 => self.in_l3,
            Fragment::L4 => self.in_l4,
        }
    }
}

impl Fragment {
    pub fn contains(self, f: &StateFormula) -> bool {
        match self {
            Fragment::L1 => l1_phi(f),
            Fragment::L2 => l2_phi(f),
            Fragment::L3 => l3_phi(f),
            Fragment::L4 => l4_phi(f),
        }
    }
}

pub fn classify(f: &StateFormula) -> FragmentMembership {
    FragmentMembership { in_l1: l1_phi(f), in_l2: l2_phi(f), in_l3: l3_phi(f), in_l4: l4_phi(f) }
}

fn is_eq1(cmp: Cmp, r: &crate::rational::Rational) -> bool {
    cmp == Cmp::Ge && *r == num_traits::One::one()
}

/// Shared shape of the boolean layer: literals pass, junctions recurse,
/// probabilistic nodes are delegated to `prob`.
fn boolean_layer(
    f: &StateFormula,
    literals: bool,
    prob: &dyn Fn(PathOp, Cmp, &crate::rational::Rational, &StateFormula) -> bool,
    rec: &dyn Fn(&StateFormula) -> bool,
) -> bool {
    match f {
        StateFormula::Atom(_) | StateFormula::NegAtom(_) => literals,
        StateFormula::And(xs) | StateFormula::Or(xs) => xs.iter().all(rec),
        StateFormula::Prob(p, cmp, r) => prob(p.op, *cmp, r, &p.body),
    }
}

fn l1_phi(f: &StateFormula) -> bool {
    boolean_layer(
        f,
        true,
        &|op, _, _, body| match op {
            PathOp::F => l1_phi(body),
            PathOp::G => l1_psi(body),
        },
        &l1_phi,
    )
}

fn l1_psi(f: &StateFormula) -> bool {
    boolean_layer(f, true, &|op, _, _, body| op == PathOp::G && l1_psi(body), &l1_psi)
}

fn l2_phi(f: &StateFormula) -> bool {
    boolean_layer(
        f,
        true,
        &|op, cmp, r, body| match op {
            PathOp::F => l2_phi(body),
            PathOp::G => is_eq1(cmp, r) && l2_psi(body),
        },
        &l2_phi,
    )
}

fn l2_psi(f: &StateFormula) -> bool {
    boolean_layer(f, true, &|op, cmp, r, body| op == PathOp::F && !is_eq1(cmp, r) && l2_psi(body), &l2_psi)
}

fn l3_phi(f: &StateFormula) -> bool {
    boolean_layer(
        f,
        true,
        &|op, cmp, r, body| match op {
            PathOp::F => l3_phi(body),
            PathOp::G => is_eq1(cmp, r) && (l2_psi(body) || l3_rho(body)),
        },
        &l3_phi,
    )
}

fn l3_rho(f: &StateFormula) -> bool {
    boolean_layer(
        f,
        false,
        &|op, cmp, r, body| match op {
            PathOp::F => !is_eq1(cmp, r) && l2_psi(body),
            PathOp::G => is_eq1(cmp, r) && (l2_psi(body) || l3_rho(body)),
        },
        &l3_rho,
    )
}

fn l4_phi(f: &StateFormula) -> bool {
    boolean_layer(
        f,
        true,
        &|op, cmp, r, body| match op {
            PathOp::F => l4_phi(body),
            PathOp::G => is_eq1(cmp, r) && l4_psi(body),
        },
        &l4_phi,
    )
}

fn l4_psi(f: &StateFormula) -> bool {
    boolean_layer(
        f,
        true,
        &|op, cmp, r, body| match op {
            PathOp::F => cmp == Cmp::Gt && r.is_zero() && l4_psi(body),
            PathOp::G => is_eq1(cmp, r) && l4_psi(body),
        },
        &l4_psi,
    )
}
