//! The recursive small-model construction.

use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigUint;

use super::{
    bscc_reduce, build_loop_model, check_loop_shape, epsilon_for, search_loop_generic, search_loop_l2,
    successor_selection, BsccError, LoopModelError, ProgressLoop, SearchError, SearchLimits, SelectionError,
    ShapeViolation, Submodel,
};
use crate::closure::{theta, uc, FormulaSet};
use crate::formula::{Fragment, StateFormula};
use crate::markov::{MarkovChain, SccDecomposition, StateId};
use crate::measure::{b_value, measure, size_bound};
use crate::modelcheck::Checker;
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// The direct construction; every set along the way must lie in the
    /// second fragment.
    L2,
    Generic(SearchLimits),
}

/// One recursion level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceNode {
    /// Name of the source state in the input chain.
    pub state: String,
    pub x: FormulaSet,
    pub measure: usize,
    pub b: usize,
    pub bound: BigUint,
    /// States of the chain built at this level.
    pub size: usize,
    pub step: TraceStep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStep {
    /// The state lies in a bottom SCC, reduced directly.
    Bottom,
    Loop {
        progress_loop: ProgressLoop,
        delta: FormulaSet,
        epsilon: Rational,
        /// `(state name, α)` for each exit successor.
        targets: Vec<(String, Rational)>,
        children: Vec<TraceNode>,
    },
}

impl TraceNode {
    pub fn depth(&self) -> usize {
        match &self.step {
            TraceStep::Bottom => 1,
            TraceStep::Loop { children, .. } => 1 + children.iter().map(TraceNode::depth).max().unwrap_or(0),
        }
    }

    /// All nodes, parents before children.
    pub fn nodes(&self) -> Vec<&TraceNode> {
        let mut out = alloc::vec![self];
        if let TraceStep::Loop { children, .. } = &self.step {
            for ch in children {
                out.extend(ch.nodes());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compression {
    pub chain: MarkovChain,
    pub entry: StateId,
    pub trace: TraceNode,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompressError {
    #[error("the start state does not satisfy `{0}`")]
    Unsatisfied(StateFormula),
    #[error("`{0}` is outside the second fragment")]
    Fragment(StateFormula),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("no progress loop for state `{0}` within the search bound")]
    NoLoop(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Bscc(#[from] BsccError),
    #[error(transparent)]
    LoopModel(#[from] LoopModelError),
    #[error("measure does not decrease from `{from}` ({before}) to `{to}` ({after})")]
    MeasureNotDecreasing { from: String, to: String, before: usize, after: usize },
    #[error("level at `{state}` has {size} states, above the bound {bound}")]
    BoundExceeded { state: String, size: usize, bound: BigUint },
    #[error("constructed chain fails `{0}` at its entry")]
    Verification(StateFormula),
    #[error("constructed chain has a non-loop SCC: {0:?}")]
    Shape(Vec<ShapeViolation>),
}

/// Builds a small model of `psi` from a model `(m, s)` of it.
///
/// The result's entry satisfies `psi`, every non-bottom SCC of the result is
/// a simple loop with one exit, and every recursion level respects
/// `2^b · (b^(‖X‖+1) − 1)/(b − 1)`.
pub fn compress_model(
    m: &MarkovChain,
    s: StateId,
    psi: &StateFormula,
    mode: SearchMode,
) -> Result<Compression, CompressError> {
    let c = Checker::new(m);
    if !c.holds(s, psi) {
        return Err(CompressError::Unsatisfied(psi.clone()));
    }
    if mode == SearchMode::L2 && !Fragment::L2.contains(psi) {
        return Err(CompressError::Fragment(psi.clone()));
    }
    let x = uc(&c, s, &[psi.clone()].into_iter().collect()).expect("s satisfies psi");
    let out = compress_set(&c, s, &x, mode)?;
    let check = Checker::new(&out.chain);
    if !check.holds(out.entry, psi) {
        return Err(CompressError::Verification(psi.clone()));
    }
    check_loop_shape(&out.chain).map_err(CompressError::Shape)?;
    Ok(out)
}

/// The recursion on a closed, updated, satisfied set `X` at `s`.
pub fn compress_set(
    c: &Checker<'_>,
    s: StateId,
    x: &FormulaSet,
    mode: SearchMode,
) -> Result<Compression, CompressError> {
    let m = c.chain();
    let name = String::from(m.name(s));
    let mu = measure(c, s, x);
    let b = b_value(x);
    let bound = size_bound(b, mu);
    let scc = SccDecomposition::new(m);

    let (chain, entry, step) = if scc.in_bottom(s) {
        let (chain, entry) = bscc_reduce(c, s, x)?;
        (chain, entry, TraceStep::Bottom)
    } else {
        let lp = match mode {
            SearchMode::L2 => search_loop_l2(c, s, x)?,
            SearchMode::Generic(limits) => {
                search_loop_generic(c, s, x, limits)?.ok_or_else(|| CompressError::NoLoop(name.clone()))?
            }
        };
        let delta = lp.delta();
        let sel = successor_selection(c, s, &delta)?;
        let mut submodels = Vec::new();
        let mut children = Vec::new();
        let mut targets = Vec::new();
        for &t in &sel.targets {
            let xt = uc(c, t, &theta(c, t, &delta)).expect("theta holds where taken");
            let child = compress_set(c, t, &xt, mode)?;
            if !scc.in_bottom(t) && child.trace.measure >= mu {
                return Err(CompressError::MeasureNotDecreasing {
                    from: name,
                    to: m.name(t).into(),
                    before: mu,
                    after: child.trace.measure,
                });
            }
            let weight = sel.alpha[&t].clone();
            targets.push((String::from(m.name(t)), weight.clone()));
            submodels.push(Submodel { chain: child.chain, entry: child.entry, weight });
            children.push(child.trace);
        }
        let epsilon = epsilon_for(&lp);
        let (chain, entry) = build_loop_model(&lp, x, &submodels, Some(epsilon.clone()))?;
        (chain, entry, TraceStep::Loop { progress_loop: lp, delta, epsilon, targets, children })
    };

    if let Some(f) = Checker::new(&chain).first_violation(entry, x) {
        return Err(CompressError::Verification(f.clone()));
    }
    if BigUint::from(chain.len()) > bound {
        return Err(CompressError::BoundExceeded { state: name, size: chain.len(), bound });
    }
    let trace = TraceNode { state: name, x: x.clone(), measure: mu, b, bound, size: chain.len(), step };
    Ok(Compression { chain, entry, trace })
}
