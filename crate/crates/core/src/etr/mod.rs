//! Bounded satisfiability through the existential theory of the reals.
//!
//! A formula is first rewritten so that `F` is the only path operator. For a
//! bound `n`, candidate graphs with at most `n` vertices are enumerated
//! together with a guess of which vertices satisfy each subformula; every
//! candidate yields a polynomial system over the edge probabilities.

mod encode;
mod enumerate;
mod solve;

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::formula::{Cmp, PathOp, StateFormula};
use crate::markov::MarkovChain;
use crate::modelcheck::path_probabilities;
use crate::rational::{is_probability, Rational};

pub use encode::{
    check_assignment, encode, interval_refutation, solve_blocks, AssignmentError, Constraint, EtrSystem,
    Relation, Term, Var, YBlock,
};
pub use enumerate::{enumerate_candidates, for_each_candidate, reaching, Candidate, EnumMode, MAX_VERTICES};
pub use solve::{
    parse_reply, rationalize, solve_bounded_sat, BackendError, BackendReply, ModelValue, SatError,
    SatOptions, SatOutcome, SatReport, SatStats, SolverBackend, SolverReply, SolverStatus,
};

/// Comparison of a probability against a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Ge,
    Gt,
    Le,
    Lt,
}

impl Rel {
    pub fn holds(self, value: &Rational, bound: &Rational) -> bool {
        match self {
            Rel::Ge => value >= bound,
            Rel::Gt => value > bound,
            Rel::Le => value <= bound,
            Rel::Lt => value < bound,
        }
    }

    pub fn negate(self) -> Rel {
        match self {
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
            Rel::Le => Rel::Gt,
            Rel::Lt => Rel::Ge,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Le => "<=",
            Rel::Lt => "<",
        }
    }

    /// `>=0`, `>1`, `<=1` and `<0`.
    pub fn is_trivial(self, bound: &Rational) -> bool {
        match self {
            Rel::Ge | Rel::Lt => bound.is_zero(),
            Rel::Gt | Rel::Le => bound.is_one(),
        }
    }
}

impl From<Cmp> for Rel {
    fn from(c: Cmp) -> Self {
        match c {
            Cmp::Ge => Rel::Ge,
            Cmp::Gt => Rel::Gt,
        }
    }
}

/// A formula whose only probabilistic operator is `F`, with negation on
/// atoms only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FFormula {
    Atom(String),
    NegAtom(String),
    And(Vec<FFormula>),
    Or(Vec<FFormula>),
    F(Box<FFormula>, Rel, Rational),
}

/// Rewrites every `G` into `F`: `G>=r ψ` becomes `F<=1-r ¬ψ` and `G>r ψ`
/// becomes `F<1-r ¬ψ`, with `¬ψ` pushed down to the atoms.
///
/// Core formulae carry no trivial bounds, and neither rewriting nor negation
/// introduces one.
pub fn f_normal_form(phi: &StateFormula) -> FFormula {
    match phi {
        StateFormula::Atom(a) => FFormula::Atom(a.clone()),
        StateFormula::NegAtom(a) => FFormula::NegAtom(a.clone()),
        StateFormula::And(xs) => FFormula::And(xs.iter().map(f_normal_form).collect()),
        StateFormula::Or(xs) => FFormula::Or(xs.iter().map(f_normal_form).collect()),
        StateFormula::Prob(p, cmp, r) => {
            let body = f_normal_form(&p.body);
            let f = match p.op {
                PathOp::F => FFormula::F(Box::new(body), Rel::from(*cmp), r.clone()),
                PathOp::G => {
                    let rel = if *cmp == Cmp::Ge { Rel::Le } else { Rel::Lt };
                    FFormula::F(Box::new(body.negate()), rel, Rational::one() - r)
                }
            };
            debug_assert!(f.bounds_are_nontrivial());
            f
        }
    }
}

impl FFormula {
    /// Negation normal form of `¬self`.
    pub fn negate(&self) -> FFormula {
        match self {
            FFormula::Atom(a) => FFormula::NegAtom(a.clone()),
            FFormula::NegAtom(a) => FFormula::Atom(a.clone()),
            FFormula::And(xs) => FFormula::Or(xs.iter().map(FFormula::negate).collect()),
            FFormula::Or(xs) => FFormula::And(xs.iter().map(FFormula::negate).collect()),
            FFormula::F(b, rel, r) => FFormula::F(b.clone(), rel.negate(), r.clone()),
        }
    }

    pub fn children(&self) -> &[FFormula] {
        match self {
            FFormula::Atom(_) | FFormula::NegAtom(_) => &[],
            FFormula::And(xs) | FFormula::Or(xs) => xs,
            FFormula::F(b, _, _) => core::slice::from_ref(&**b),
        }
    }

    /// All subformulae, including `self`.
    pub fn sub(&self) -> BTreeSet<FFormula> {
        let mut out = BTreeSet::new();
        let mut stack = alloc::vec![self];
        while let Some(f) = stack.pop() {
            if out.insert(f.clone()) {
                stack.extend(f.children());
            }
        }
        out
    }

    /// Subformulae of the form `F⋈r ψ`.
    pub fn f_subformulas(&self) -> BTreeSet<FFormula> {
        self.sub().into_iter().filter(|f| matches!(f, FFormula::F(..))).collect()
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        self.sub()
            .into_iter()
            .filter_map(|f| match f {
                FFormula::Atom(a) | FFormula::NegAtom(a) => Some(a),
                _ => None,
            })
            .collect()
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(FFormula::size).sum::<usize>()
    }

    pub fn bounds_are_nontrivial(&self) -> bool {
        self.sub().iter().all(|f| match f {
            FFormula::F(_, rel, r) => !rel.is_trivial(r) && is_probability(r),
            _ => true,
        })
    }

    /// Satisfaction set over `m`, indexed by state.
    pub fn sat(&self, m: &MarkovChain) -> Vec<bool> {
        match self {
            FFormula::Atom(a) => m.states().map(|s| m.has_label(s, a)).collect(),
            FFormula::NegAtom(a) => m.states().map(|s| !m.has_label(s, a)).collect(),
            FFormula::And(xs) | FFormula::Or(xs) => {
                let conj = matches!(self, FFormula::And(_));
                let parts: Vec<Vec<bool>> = xs.iter().map(|x| x.sat(m)).collect();
                m.states()
                    .map(|s| if conj { parts.iter().all(|p| p[s]) } else { parts.iter().any(|p| p[s]) })
                    .collect()
            }
            FFormula::F(b, rel, r) => {
                let probs = path_probabilities(m, PathOp::F, &b.sat(m));
                probs.iter().map(|p| rel.holds(p, r)).collect()
            }
        }
    }
}

impl fmt::Display for FFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FFormula::Atom(a) => f.write_str(a),
            FFormula::NegAtom(a) => write!(f, "!{}", a),
            FFormula::And(xs) | FFormula::Or(xs) => {
                let sep = if matches!(self, FFormula::And(_)) { " & " } else { " | " };
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    if matches!(x, FFormula::And(_) | FFormula::Or(_)) {
                        write!(f, "({})", x)?;
                    } else {
                        write!(f, "{}", x)?;
                    }
                }
                Ok(())
            }
            FFormula::F(b, Rel::Ge, r) if r.is_one() => write!(f, "F=1[{}]", b),
            FFormula::F(b, rel, r) => write!(f, "F{}{}[{}]", rel.symbol(), r, b),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::formula::tests::*;
    use crate::modelcheck::tests::random_chain;
    use crate::modelcheck::Checker;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    pub(crate) fn ff(text: &str) -> FFormula {
        f_normal_form(&parse_formula(text).unwrap())
    }

    pub(crate) fn fa() -> FFormula {
        FFormula::Atom("a".into())
    }

    #[test]
    fn g_almost_sure_becomes_f_zero() {
        let nf = f_normal_form(&g(Cmp::Ge, int(1), a()));
        assert_eq!(nf, FFormula::F(Box::new(FFormula::NegAtom("a".into())), Rel::Le, int(0)));
        assert_eq!(nf.to_string(), "F<=0[!a]");
    }

    #[test]
    fn f_is_unchanged() {
        let nf = f_normal_form(&f(Cmp::Ge, ratio(1, 2), a()));
        assert_eq!(nf, FFormula::F(Box::new(fa()), Rel::Ge, ratio(1, 2)));
    }

    #[test]
    fn strict_g_becomes_strict_f() {
        let nf = f_normal_form(&g(Cmp::Gt, ratio(3, 10), a()));
        assert_eq!(nf, FFormula::F(Box::new(FFormula::NegAtom("a".into())), Rel::Lt, ratio(7, 10)));
    }

    #[test]
    fn running_example_has_no_g() {
        let nf = f_normal_form(&psi());
        assert!(nf.bounds_are_nontrivial());
        // F≥0.5 occurs only under G, so only its negation survives
        assert_eq!(nf.f_subformulas().len(), 5);
        let m = crate::markov::tests::running_chain();
        assert_eq!(nf.sat(&m), alloc::vec![true, false, false]);
    }

    #[test]
    fn negation_is_an_involution() {
        let nf = f_normal_form(&psi());
        assert_eq!(nf.negate().negate(), nf);
    }

    proptest! {
        #[test]
        fn normal_form_preserves_sat_sets(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..6);
            let m = random_chain(&mut rng, n);
            let phi = crate::closure::tests::random_formula(&mut rng, 3);
            let nf = f_normal_form(&phi);
            prop_assert!(nf.bounds_are_nontrivial());
            prop_assert_eq!(nf.sat(&m), Checker::new(&m).sat(&phi));
            prop_assert_eq!(nf.negate().sat(&m), Checker::new(&m).sat(&phi).iter().map(|b| !b).collect::<Vec<_>>());
        }
    }
}
