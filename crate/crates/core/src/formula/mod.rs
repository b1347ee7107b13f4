//! PCTL state and path formulae over `F` and `G`, in core form.
//!
//! Core form keeps negation on atoms only and uses the comparisons `>=` and
//! `>` exclusively. Conjunction and disjunction are n-ary and flattened, so
//! `a & b & c` is a single node with three children and none of its children
//! is itself a conjunction.

mod fragment;
mod parse;

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::rational::Rational;

pub use fragment::{classify, Fragment, FragmentMembership};
pub use parse::{
    normalize, parse, parse_formula, FormulaError, NormalizeError, ParseError, ParseErrorKind, Pos,
    SurfaceCmp, SurfaceFormula,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathOp {
    F,
    G,
}

impl fmt::Display for PathOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathOp::F => "F",
            PathOp::G => "G",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cmp {
    Ge,
    Gt,
}

impl Cmp {
    pub fn holds(self, value: &Rational, bound: &Rational) -> bool {
        match self {
            Cmp::Ge => value >= bound,
            Cmp::Gt => value > bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trivial probability constraint {cmp}{bound}")]
pub struct TrivialBound {
    pub cmp: &'static str,
    pub bound: Rational,
}

/// A path formula `F φ` or `G φ`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathFormula {
    pub op: PathOp,
    pub body: StateFormula,
}

impl PathFormula {
    pub fn new(op: PathOp, body: StateFormula) -> Self {
        PathFormula { op, body }
    }

    pub fn eventually(body: StateFormula) -> Self {
        Self::new(PathOp::F, body)
    }

    pub fn always(body: StateFormula) -> Self {
        Self::new(PathOp::G, body)
    }
}

/// A state formula in core form.
///
/// Construct probabilistic nodes through [`StateFormula::prob`] so trivial
/// bounds are rejected, and boolean nodes through [`StateFormula::and`] /
/// [`StateFormula::or`] so they stay flat.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateFormula {
    Atom(String),
    NegAtom(String),
    And(Vec<StateFormula>),
    Or(Vec<StateFormula>),
    Prob(Box<PathFormula>, Cmp, Rational),
}

impl StateFormula {
    pub fn atom(name: impl Into<String>) -> Self {
        StateFormula::Atom(name.into())
    }

    pub fn neg_atom(name: impl Into<String>) -> Self {
        StateFormula::NegAtom(name.into())
    }

    /// Flattening conjunction. A single operand is returned unchanged.
    ///
    /// # Panics
    /// If `parts` is empty.
    pub fn and(parts: impl IntoIterator<Item = StateFormula>) -> Self {
        Self::junction(parts, true)
    }

    /// Flattening disjunction. A single operand is returned unchanged.
    ///
    /// # Panics
    /// If `parts` is empty.
    pub fn or(parts: impl IntoIterator<Item = StateFormula>) -> Self {
        Self::junction(parts, false)
    }

    fn junction(parts: impl IntoIterator<Item = StateFormula>, conj: bool) -> Self {
        let mut flat = Vec::new();
        for p in parts {
            match (p, conj) {
                (StateFormula::And(xs), true) | (StateFormula::Or(xs), false) => flat.extend(xs),
                (p, _) => flat.push(p),
            }
        }
        assert!(!flat.is_empty(), "empty junction");
        if flat.len() == 1 {
            return flat.pop().unwrap();
        }
        if conj {
            StateFormula::And(flat)
        } else {
            StateFormula::Or(flat)
        }
    }

    /// `P(op body) cmp bound`, rejecting bounds outside `[0,1]` and the
    /// trivial constraints `>=0` and `>1`.
    pub fn prob(op: PathOp, cmp: Cmp, bound: Rational, body: StateFormula) -> Result<Self, TrivialBound> {
        let trivial = match cmp {
            Cmp::Ge => bound.is_zero(),
            Cmp::Gt => bound >= Rational::one(),
        };
        if trivial || bound < Rational::zero() || bound > Rational::one() {
            let cmp = match cmp {
                Cmp::Ge => ">=",
                Cmp::Gt => ">",
            };
            return Err(TrivialBound { cmp, bound });
        }
        Ok(StateFormula::Prob(Box::new(PathFormula::new(op, body)), cmp, bound))
    }

    /// Probabilistic node for a path formula that is known to be non-trivial
    /// (for instance a bound copied from an existing valid formula).
    pub(crate) fn prob_unchecked(path: PathFormula, cmp: Cmp, bound: Rational) -> Self {
        debug_assert!(StateFormula::prob(path.op, cmp, bound.clone(), path.body.clone()).is_ok());
        StateFormula::Prob(Box::new(path), cmp, bound)
    }

    pub fn as_prob(&self) -> Option<(&PathFormula, Cmp, &Rational)> {
        match self {
            StateFormula::Prob(p, c, r) => Some((p, *c, r)),
            _ => None,
        }
    }

    pub fn is_prob(&self) -> bool {
        matches!(self, StateFormula::Prob(..))
    }

    /// True for `P(Φ) >= 1`, written `=1`.
    pub fn is_almost_sure(&self) -> bool {
        matches!(self, StateFormula::Prob(_, Cmp::Ge, r) if r.is_one())
    }

    /// Immediate state subformulae (children in the syntax tree).
    pub fn children(&self) -> &[StateFormula] {
        match self {
            StateFormula::Atom(_) | StateFormula::NegAtom(_) => &[],
            StateFormula::And(xs) | StateFormula::Or(xs) => xs,
            StateFormula::Prob(p, _, _) => core::slice::from_ref(&p.body),
        }
    }

    /// All state subformulae, including `self`.
    pub fn sub(&self) -> BTreeSet<StateFormula> {
        let mut out = BTreeSet::new();
        self.collect_sub(&mut out);
        out
    }

    fn collect_sub(&self, out: &mut BTreeSet<StateFormula>) {
        if out.insert(self.clone()) {
            for c in self.children() {
                c.collect_sub(out);
            }
        }
    }

    /// Path formulae of the outermost probabilistic subformulae: those not
    /// nested inside another probabilistic operator. For a probabilistic
    /// formula this is its own path formula.
    pub fn top_paths(&self) -> BTreeSet<PathFormula> {
        let mut out = BTreeSet::new();
        self.collect_top_paths(&mut out);
        out
    }

    fn collect_top_paths(&self, out: &mut BTreeSet<PathFormula>) {
        match self {
            StateFormula::Prob(p, _, _) => {
                out.insert((**p).clone());
            }
            _ => self.children().iter().for_each(|c| c.collect_top_paths(out)),
        }
    }

    /// Atomic propositions occurring in the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        self.sub()
            .into_iter()
            .filter_map(|f| match f {
                StateFormula::Atom(a) | StateFormula::NegAtom(a) => Some(a),
                _ => None,
            })
            .collect()
    }

    /// Number of syntax-tree nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(StateFormula::size).sum::<usize>()
    }
}

fn write_bound(f: &mut fmt::Formatter<'_>, cmp: Cmp, bound: &Rational) -> fmt::Result {
    match cmp {
        Cmp::Ge if bound.is_one() => f.write_str("=1"),
        Cmp::Ge => write!(f, ">={}", bound),
        Cmp::Gt => write!(f, ">{}", bound),
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::Atom(a) => f.write_str(a),
            StateFormula::NegAtom(a) => write!(f, "!{}", a),
            StateFormula::And(xs) | StateFormula::Or(xs) => {
                let sep = if matches!(self, StateFormula::And(_)) { " & " } else { " | " };
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    if matches!(x, StateFormula::And(_) | StateFormula::Or(_)) {
                        write!(f, "({})", x)?;
                    } else {
                        write!(f, "{}", x)?;
                    }
                }
                Ok(())
            }
            StateFormula::Prob(p, cmp, r) => {
                write!(f, "{}", p.op)?;
                write_bound(f, *cmp, r)?;
                write!(f, "[{}]", p.body)
            }
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.op, self.body)
    }
}

/// The derived sets of a finite formula set `X`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FormulaSets {
    /// Every state subformula of every member.
    pub sub: BTreeSet<StateFormula>,
    /// Path formulae `Φ` with some `P(Φ)▷r` in `sub`.
    pub psub: BTreeSet<PathFormula>,
    /// Path formulae of probabilistic subformulae not nested under another
    /// probabilistic operator.
    pub top_psub: BTreeSet<PathFormula>,
    /// Members of `sub` that are not probabilistic.
    pub nsub: BTreeSet<StateFormula>,
    /// Path formulae `Φ` with some `P(Φ)▷r` in `X` itself.
    pub p: BTreeSet<PathFormula>,
}

pub fn formula_sets<'a>(xs: impl IntoIterator<Item = &'a StateFormula>) -> FormulaSets {
    let mut sets = FormulaSets::default();
    for x in xs {
        x.collect_sub(&mut sets.sub);
        x.collect_top_paths(&mut sets.top_psub);
        if let StateFormula::Prob(p, _, _) = x {
            sets.p.insert((**p).clone());
        }
    }
    for f in &sets.sub {
        match f {
            StateFormula::Prob(p, _, _) => {
                sets.psub.insert((**p).clone());
            }
            _ => {
                sets.nsub.insert(f.clone());
            }
        }
    }
    sets
}

/// `sub(X)`.
pub fn sub_of<'a>(xs: impl IntoIterator<Item = &'a StateFormula>) -> BTreeSet<StateFormula> {
    let mut out = BTreeSet::new();
    for x in xs {
        x.collect_sub(&mut out);
    }
    out
}

/// `⋃_{φ∈X} sub(φ) ∖ {φ}`.
pub fn proper_sub_union<'a>(xs: impl IntoIterator<Item = &'a StateFormula>) -> BTreeSet<StateFormula> {
    let mut out = BTreeSet::new();
    for x in xs {
        for c in x.children() {
            c.collect_sub(&mut out);
        }
    }
    out
}

pub fn display_set<'a>(xs: impl IntoIterator<Item = &'a StateFormula>) -> String {
    let parts: Vec<String> = xs.into_iter().map(|f| alloc::format!("{}", f)).collect();
    alloc::format!("{{{}}}", parts.join(", "))
}
