//! Progress loops, their verification and search, and the recursive model
//! compression built on them.

mod compress;
mod construct;
mod search;
mod selection;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::closure::{uc, FormulaSet};
use crate::formula::{formula_sets, PathFormula, PathOp, StateFormula};
use crate::markov::StateId;
use crate::measure::{cf, deg};
use crate::modelcheck::Checker;

pub use compress::{
    compress_model, compress_set, CompressError, Compression, SearchMode, TraceNode, TraceStep,
};
pub use construct::{
    bscc_reduce, build_loop_model, check_loop_shape, epsilon_for, BsccError, LoopModelError, ShapeViolation,
    Submodel,
};
pub use search::{search_loop_generic, search_loop_l2, SearchError, SearchLimits};
pub use selection::{
    caratheodory, successor_selection, SelectionError, SelectionViolation, SuccessorSelection,
};

/// A sequence `L₀, …, Lₙ` of formula sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProgressLoop {
    pub sets: Vec<FormulaSet>,
}

impl ProgressLoop {
    pub fn new(sets: Vec<FormulaSet>) -> Self {
        ProgressLoop { sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn union(&self) -> FormulaSet {
        self.sets.iter().flatten().cloned().collect()
    }

    /// Index of the first set containing all of `xs`.
    pub fn entry_index(&self, xs: &FormulaSet) -> Option<usize> {
        self.sets.iter().position(|l| xs.is_subset(l))
    }

    /// `Δ(𝓛)`: every `G▷r ψ` in the loop, every `F▷r ψ` whose body appears
    /// nowhere in the loop, and every `F=1 ψ` in some `Lᵢ` whose body is
    /// absent from `Lᵢ ∪ ⋯ ∪ Lₙ`.
    pub fn delta(&self) -> FormulaSet {
        let all = self.union();
        // suffix[i] = Lᵢ ∪ ⋯ ∪ Lₙ
        let mut suffix: Vec<FormulaSet> = alloc::vec![FormulaSet::new(); self.len() + 1];
        for i in (0..self.len()).rev() {
            let mut u = suffix[i + 1].clone();
            u.extend(self.sets[i].iter().cloned());
            suffix[i] = u;
        }
        all.iter()
            .filter(|phi| match phi.as_prob() {
                Some((p, _, _)) if p.op == PathOp::G => true,
                Some((p, _, _)) => {
                    !all.contains(&p.body)
                        || (phi.is_almost_sure()
                            && (0..self.len())
                                .any(|i| self.sets[i].contains(phi) && !suffix[i].contains(&p.body)))
                }
                None => false,
            })
            .cloned()
            .collect()
    }
}

pub fn delta(l: &ProgressLoop) -> FormulaSet {
    l.delta()
}

impl fmt::Display for ProgressLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.sets.iter().enumerate() {
            writeln!(f, "L{} = {}", i, crate::formula::display_set(l))?;
        }
        Ok(())
    }
}

/// A reason a sequence of sets is not a progress loop for `X` and `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoopViolation {
    /// `X ≠ UCₛ(X)`.
    NotClosed,
    /// `s ⊭ φ` for some `φ ∈ X`.
    Unsatisfied(StateFormula),
    Empty,
    NotSubformula {
        index: usize,
        formula: StateFormula,
    },
    /// Condition (1).
    NoSetContainsX,
    /// Condition (2).
    Duplicate {
        first: usize,
        second: usize,
    },
    /// Condition (3): `a` and `¬a` together.
    Contradiction {
        index: usize,
        atom: String,
    },
    /// Condition (3): a conjunct is missing.
    AndRule {
        index: usize,
        formula: StateFormula,
        missing: StateFormula,
    },
    /// Condition (3): no disjunct present.
    OrRule {
        index: usize,
        formula: StateFormula,
    },
    /// Condition (3): `G▷r φ ∈ Lᵢ` but `φ ∉ Lⱼ`.
    GRule {
        index: usize,
        formula: StateFormula,
        missing_in: usize,
    },
    /// Condition (4).
    DeltaUnsatisfied(StateFormula),
    /// Condition (5).
    FBodyHolds(StateFormula),
    /// Condition (6).
    CfNotIncluded(PathFormula),
}

impl LoopViolation {
    /// Number of the violated condition, or 0 for hypotheses and shape.
    pub fn condition(&self) -> u8 {
        match self {
            LoopViolation::NoSetContainsX => 1,
            LoopViolation::Duplicate { .. } => 2,
            LoopViolation::Contradiction { .. }
            | LoopViolation::AndRule { .. }
            | LoopViolation::OrRule { .. }
            | LoopViolation::GRule { .. } => 3,
            LoopViolation::DeltaUnsatisfied(_) => 4,
            LoopViolation::FBodyHolds(_) => 5,
            LoopViolation::CfNotIncluded(_) => 6,
            _ => 0,
        }
    }
}

impl fmt::Display for LoopViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopViolation::NotClosed => f.write_str("hypothesis: X is not closed under UC"),
            LoopViolation::Unsatisfied(p) => write!(f, "hypothesis: state does not satisfy {}", p),
            LoopViolation::Empty => f.write_str("loop has no sets"),
            LoopViolation::NotSubformula { index, formula } => {
                write!(f, "L{} contains {}, which is not in sub(X)", index, formula)
            }
            LoopViolation::NoSetContainsX => f.write_str("(1) no set contains X"),
            LoopViolation::Duplicate { first, second } => {
                write!(f, "(2) L{} and L{} are equal", first, second)
            }
            LoopViolation::Contradiction { index, atom } => {
                write!(f, "(3) L{} contains both {} and !{}", index, atom, atom)
            }
            LoopViolation::AndRule { index, formula, missing } => {
                write!(f, "(3) L{} contains {} but not {}", index, formula, missing)
            }
            LoopViolation::OrRule { index, formula } => {
                write!(f, "(3) L{} contains {} but none of its disjuncts", index, formula)
            }
            LoopViolation::GRule { index, formula, missing_in } => {
                write!(f, "(3) L{} contains {} but L{} lacks its body", index, formula, missing_in)
            }
            LoopViolation::DeltaUnsatisfied(p) => write!(f, "(4) state does not satisfy {}", p),
            LoopViolation::FBodyHolds(p) => write!(f, "(5) the body of {} already holds", p),
            LoopViolation::CfNotIncluded(p) => write!(f, "(6) {} is in cf(Δ) but not cf(X)", p),
        }
    }
}

/// `cfₛ(Y)` with the `deg`-filter of `Y` itself.
pub(crate) fn cf_of(c: &Checker<'_>, s: StateId, ys: &FormulaSet) -> BTreeSet<PathFormula> {
    let d = deg(c, s, ys);
    cf(c, s, ys, &d)
}

/// Local rules of condition (3) for one set.
pub(crate) fn local_violations(index: usize, l: &FormulaSet, out: &mut Vec<LoopViolation>) {
    for phi in l {
        match phi {
            StateFormula::Atom(a) => {
                if l.contains(&StateFormula::NegAtom(a.clone())) {
                    out.push(LoopViolation::Contradiction { index, atom: a.clone() });
                }
            }
            StateFormula::And(xs) => {
                for x in xs {
                    if !l.contains(x) {
                        out.push(LoopViolation::AndRule { index, formula: phi.clone(), missing: x.clone() });
                    }
                }
            }
            StateFormula::Or(xs) if !xs.iter().any(|x| l.contains(x)) => {
                out.push(LoopViolation::OrRule { index, formula: phi.clone() });
            }
            _ => {}
        }
    }
}

/// Checks the hypotheses and all six conditions independently, reporting
/// every violation found.
pub fn verify_loop(
    c: &Checker<'_>,
    s: StateId,
    xs: &FormulaSet,
    l: &ProgressLoop,
) -> Result<(), Vec<LoopViolation>> {
    let mut out = Vec::new();
    match c.first_violation(s, xs) {
        Some(f) => out.push(LoopViolation::Unsatisfied(f.clone())),
        None => {
            if uc(c, s, xs).as_ref() != Ok(xs) {
                out.push(LoopViolation::NotClosed);
            }
        }
    }
    if let Err(v) = verify_conditions(c, s, xs, l) {
        out.extend(v);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// The six conditions alone, without re-checking the hypotheses on `X`.
pub(crate) fn verify_conditions(
    c: &Checker<'_>,
    s: StateId,
    xs: &FormulaSet,
    l: &ProgressLoop,
) -> Result<(), Vec<LoopViolation>> {
    let mut out = Vec::new();
    if l.is_empty() {
        out.push(LoopViolation::Empty);
        return Err(out);
    }
    let sub = formula_sets(xs).sub;
    for (i, li) in l.sets.iter().enumerate() {
        for phi in li.difference(&sub) {
            out.push(LoopViolation::NotSubformula { index: i, formula: phi.clone() });
        }
    }
    if l.entry_index(xs).is_none() {
        out.push(LoopViolation::NoSetContainsX);
    }
    for i in 0..l.len() {
        for j in i + 1..l.len() {
            if l.sets[i] == l.sets[j] {
                out.push(LoopViolation::Duplicate { first: i, second: j });
            }
        }
    }
    for (i, li) in l.sets.iter().enumerate() {
        local_violations(i, li, &mut out);
        for phi in li {
            if let Some((p, _, _)) = phi.as_prob() {
                if p.op == PathOp::G {
                    for (j, lj) in l.sets.iter().enumerate() {
                        if !lj.contains(&p.body) {
                            out.push(LoopViolation::GRule { index: i, formula: phi.clone(), missing_in: j });
                        }
                    }
                }
            }
        }
    }
    let d = l.delta();
    for phi in &d {
        if !c.holds(s, phi) {
            out.push(LoopViolation::DeltaUnsatisfied(phi.clone()));
        }
        if let Some((p, _, _)) = phi.as_prob() {
            if p.op == PathOp::F && c.holds(s, &p.body) {
                out.push(LoopViolation::FBodyHolds(phi.clone()));
            }
        }
    }
    let cf_x = cf_of(c, s, xs);
    for p in cf_of(c, s, &d) {
        if !cf_x.contains(&p) {
            out.push(LoopViolation::CfNotIncluded(p));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
