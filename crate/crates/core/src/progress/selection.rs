//! Choosing the exit successors of a loop and their weights.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::closure::FormulaSet;
use crate::formula::{PathFormula, PathOp, StateFormula};
use crate::linalg::null_vector;
use crate::markov::{FirstPassageError, SccDecomposition, StateId};
use crate::modelcheck::Checker;
use crate::rational::Rational;

/// Exit successors `T` with weights `α`, and the data they were derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessorSelection {
    pub delta: FormulaSet,
    /// `p(Δ)` with the `F`-formulae first.
    pub paths: Vec<PathFormula>,
    /// Number of `F`-formulae in `paths`.
    pub v: usize,
    /// States in a bottom SCC or satisfying the body of an `F`-formula.
    pub b_states: Vec<StateId>,
    /// First-visit probabilities into `b_states` from `s`.
    pub y: BTreeMap<StateId, Rational>,
    /// `P_s(Φᵢ)` for each path formula.
    pub source: Vec<Rational>,
    pub targets: Vec<StateId>,
    pub alpha: BTreeMap<StateId, Rational>,
    /// `P_t(Φᵢ)` for each target.
    pub vectors: BTreeMap<StateId, Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionViolation {
    WeightSum(Rational),
    Size { got: usize, max: usize },
    Bound { path: PathFormula, source: Rational, combined: Rational },
    Unreachable(StateId),
    NotEligible(StateId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("state does not satisfy `{0}`")]
    Unsatisfied(StateFormula),
    #[error(transparent)]
    FirstPassage(#[from] FirstPassageError),
}

/// Reduces the support of a convex combination of `points` to an affinely
/// independent subset, hence at most `dim + 1` points, keeping `Σ wⱼ·pⱼ` and
/// `Σ wⱼ` unchanged.
///
/// Returns `(index, weight)` pairs with positive weights, by ascending index.
pub fn caratheodory(points: &[Vec<Rational>], weights: &[Rational]) -> Vec<(usize, Rational)> {
    let dim = points.first().map_or(0, Vec::len);
    let mut active: Vec<(usize, Rational)> =
        weights.iter().enumerate().filter(|(_, w)| w.is_positive()).map(|(i, w)| (i, w.clone())).collect();
    loop {
        let cols = active.len();
        let mut rows: Vec<Vec<Rational>> =
            (0..dim).map(|d| active.iter().map(|(j, _)| points[*j][d].clone()).collect()).collect();
        rows.push(alloc::vec![Rational::one(); cols]);
        // stops once the remaining points are affinely independent
        let Some(mut c) = null_vector(rows, cols) else { break };
        if !c.iter().any(Signed::is_positive) {
            c.iter_mut().for_each(|x| *x = -x.clone());
        }
        let lambda = active
            .iter()
            .zip(&c)
            .filter(|(_, cj)| cj.is_positive())
            .map(|((_, w), cj)| w / cj)
            .min()
            .expect("some coefficient is positive");
        for ((_, w), cj) in active.iter_mut().zip(&c) {
            *w -= &lambda * cj;
        }
        // every minimiser reaches exactly zero and is dropped together
        active.retain(|(_, w)| !w.is_zero());
    }
    active
}

/// Picks `T` and `α` for `Δ` at `s`: first-visit distribution over the
/// eligible states, reduced by Carathéodory over all `|p(Δ)|` coordinates.
pub fn successor_selection(
    c: &Checker<'_>,
    s: StateId,
    delta: &FormulaSet,
) -> Result<SuccessorSelection, SelectionError> {
    if let Some(f) = c.first_violation(s, delta) {
        return Err(SelectionError::Unsatisfied(f.clone()));
    }
    let m = c.chain();
    let mut paths: Vec<PathFormula> =
        delta.iter().filter_map(|f| f.as_prob()).map(|(p, _, _)| p.clone()).collect();
    paths.sort_by_key(|p| p.op != PathOp::F);
    paths.dedup();
    let v = paths.iter().filter(|p| p.op == PathOp::F).count();

    let scc = SccDecomposition::new(m);
    let bodies: Vec<Vec<bool>> = paths[..v].iter().map(|p| c.sat(&p.body)).collect();
    let b_states: Vec<StateId> =
        m.states().filter(|&t| scc.in_bottom(t) || bodies.iter().any(|b| b[t])).collect();
    let y = m.first_passage(s, &b_states.iter().copied().collect())?;

    let probs: Vec<Vec<Rational>> = paths.iter().map(|p| c.path_probs(p)).collect();
    let vector = |t: StateId| -> Vec<Rational> { probs.iter().map(|col| col[t].clone()).collect() };
    let support: Vec<StateId> = y.iter().filter(|(_, w)| w.is_positive()).map(|(t, _)| *t).collect();
    let points: Vec<Vec<Rational>> = support.iter().map(|&t| vector(t)).collect();
    let weights: Vec<Rational> = support.iter().map(|t| y[t].clone()).collect();
    let reduced = caratheodory(&points, &weights);

    let targets: Vec<StateId> = reduced.iter().map(|(i, _)| support[*i]).collect();
    let alpha = reduced.iter().map(|(i, w)| (support[*i], w.clone())).collect();
    let vectors = targets.iter().map(|&t| (t, vector(t))).collect();
    Ok(SuccessorSelection {
        delta: delta.clone(),
        source: vector(s),
        paths,
        v,
        b_states,
        y,
        targets,
        alpha,
        vectors,
    })
}

impl SuccessorSelection {
    /// Checks the five conditions on `T` and `α` independently.
    pub fn violations(&self, c: &Checker<'_>, s: StateId) -> Vec<SelectionViolation> {
        let m = c.chain();
        let mut out = Vec::new();
        let sum: Rational = self.alpha.values().sum();
        if !sum.is_one() {
            out.push(SelectionViolation::WeightSum(sum));
        }
        let max = self.paths.len() + 1;
        if self.targets.is_empty() || self.targets.len() > max {
            out.push(SelectionViolation::Size { got: self.targets.len(), max });
        }
        for (i, path) in self.paths.iter().enumerate() {
            let source = c.prob(s, path);
            let combined: Rational = self.targets.iter().map(|t| &self.alpha[t] * c.prob(*t, path)).sum();
            if source > combined {
                out.push(SelectionViolation::Bound { path: path.clone(), source, combined });
            }
            debug_assert_eq!(self.source[i], c.prob(s, path));
        }
        let reach = m.reachable_from(s);
        let scc = SccDecomposition::new(m);
        for &t in &self.targets {
            if !reach[t] {
                out.push(SelectionViolation::Unreachable(t));
            }
            let eligible =
                scc.in_bottom(t) || self.paths.iter().any(|p| p.op == PathOp::F && c.holds(t, &p.body));
            if !eligible {
                out.push(SelectionViolation::NotEligible(t));
            }
        }
        out
    }
}
