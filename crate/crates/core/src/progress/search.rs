//! Finding progress loops: exhaustive bounded search, and the direct
//! construction available for the second fragment.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{verify_conditions, LoopViolation, ProgressLoop};
use crate::closure::FormulaSet;
use crate::formula::{formula_sets, Fragment, PathOp, StateFormula};
use crate::markov::StateId;
use crate::modelcheck::Checker;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    /// Largest loop index `n`; loops have at most `max_n + 1` sets.
    pub max_n: usize,
    /// Search nodes visited before giving up with
    /// [`SearchError::SpaceExceeded`].
    pub node_budget: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_n: 4, node_budget: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("loop hypotheses fail: {}", .0.iter().map(|v| alloc::format!("{}", v)).collect::<Vec<_>>().join("; "))]
    Hypothesis(Vec<LoopViolation>),
    #[error("`{0}` is outside the fragment")]
    Fragment(StateFormula),
    #[error("search space exceeded after {nodes} nodes")]
    SpaceExceeded { nodes: u64 },
    #[error("no reachable witness for `{0}`")]
    NoWitness(StateFormula),
    #[error("constructed sequence is not a progress loop: {}", .0.iter().map(|v| alloc::format!("{}", v)).collect::<Vec<_>>().join("; "))]
    Construction(Vec<LoopViolation>),
}

fn hypotheses(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> Result<(), SearchError> {
    let mut v = Vec::new();
    if let Some(f) = c.first_violation(s, xs) {
        v.push(LoopViolation::Unsatisfied(f.clone()));
    } else if crate::closure::uc(c, s, xs).as_ref() != Ok(xs) {
        v.push(LoopViolation::NotClosed);
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(SearchError::Hypothesis(v))
    }
}

/// Least superset of `seed` closed under the conjunct rule, the satisfied
/// disjunct and satisfied `F`-body rules at `t`, and (when `unfold_g`) the
/// `G`-body rule.
fn close_at(c: &Checker<'_>, t: StateId, seed: FormulaSet, unfold_g: bool) -> FormulaSet {
    let mut out = seed;
    let mut work: Vec<StateFormula> = out.iter().cloned().collect();
    while let Some(phi) = work.pop() {
        let add: Vec<StateFormula> = match &phi {
            StateFormula::And(xs) => xs.clone(),
            StateFormula::Or(xs) => xs.iter().filter(|x| c.holds(t, x)).cloned().collect(),
            StateFormula::Prob(p, _, _) => match p.op {
                PathOp::F if c.holds(t, &p.body) => vec![p.body.clone()],
                PathOp::G if unfold_g => vec![p.body.clone()],
                _ => Vec::new(),
            },
            _ => Vec::new(),
        };
        for x in add {
            if out.insert(x.clone()) {
                work.push(x);
            }
        }
    }
    out
}

/// The inductive construction for the second fragment.
///
/// `L₀` closes `X` at `s`; each further set serves one `F▷r ξ` introduced by
/// the loop whose body is not yet present, at the first state in
/// breadth-first order from that set's witness that satisfies `ξ` and every
/// `G=1` body of `L₀`.
pub fn search_loop_l2(c: &Checker<'_>, s: StateId, xs: &FormulaSet) -> Result<ProgressLoop, SearchError> {
    if let Some(f) = xs.iter().find(|f| !Fragment::L2.contains(f)) {
        return Err(SearchError::Fragment(f.clone()));
    }
    hypotheses(c, s, xs)?;
    let l0 = close_at(c, s, xs.clone(), true);
    let n_set: FormulaSet = l0
        .iter()
        .filter_map(|f| match f.as_prob() {
            Some((p, _, _)) if p.op == PathOp::G && f.is_almost_sure() => Some(p.body.clone()),
            _ => None,
        })
        .collect();
    let n_vec: Vec<Vec<bool>> = n_set.iter().map(|f| c.sat(f)).collect();
    let mut sets = vec![l0];
    let mut witnesses = vec![s];
    loop {
        let union: FormulaSet = sets.iter().flatten().cloned().collect();
        let pending = sets.iter().enumerate().find_map(|(i, l)| {
            l.iter().find_map(|f| match f.as_prob() {
                Some((p, _, _)) if p.op == PathOp::F && !xs.contains(f) && !union.contains(&p.body) => {
                    Some((i, p.body.clone()))
                }
                _ => None,
            })
        });
        let Some((i, xi)) = pending else { break };
        let sat_xi = c.sat(&xi);
        let t = bfs_order(c, witnesses[i])
            .into_iter()
            .find(|&t| sat_xi[t] && n_vec.iter().all(|v| v[t]))
            .ok_or_else(|| SearchError::NoWitness(xi.clone()))?;
        let mut seed = n_set.clone();
        seed.insert(xi);
        sets.push(close_at(c, t, seed, false));
        witnesses.push(t);
    }
    let l = ProgressLoop::new(sets);
    verify_conditions(c, s, xs, &l).map_err(SearchError::Construction)?;
    Ok(l)
}

/// States reachable from `s`, breadth first, successors by ascending id.
fn bfs_order(c: &Checker<'_>, s: StateId) -> Vec<StateId> {
    let m = c.chain();
    let mut seen = vec![false; m.len()];
    let mut order = Vec::new();
    let mut q = VecDeque::from([s]);
    seen[s] = true;
    while let Some(u) = q.pop_front() {
        order.push(u);
        for (v, _) in m.successors(u) {
            if !seen[*v] {
                seen[*v] = true;
                q.push_back(*v);
            }
        }
    }
    order
}

/// Syntax of one member of `sub(X)`, by index.
enum Node {
    Atom(Option<usize>),
    And(Vec<usize>),
    Or(Vec<usize>),
    G(usize),
    Other,
}

type Mask = u64;

const MAX_SUB: usize = 24;

/// Exhaustive search over sequences of distinct subsets of `sub(X)`,
/// shortest first. Sets violating the local rules, containing a `G`-formula
/// false at `s`, or missing a `G`-body required by another chosen set are
/// never tried.
///
/// Returns `Ok(None)` when no loop with at most `min(max_n, 2^|sub(X)| − 1)`
/// as last index exists.
pub fn search_loop_generic(
    c: &Checker<'_>,
    s: StateId,
    xs: &FormulaSet,
    limits: SearchLimits,
) -> Result<Option<ProgressLoop>, SearchError> {
    hypotheses(c, s, xs)?;
    let sub: Vec<StateFormula> = formula_sets(xs).sub.into_iter().collect();
    let k = sub.len();
    if k > MAX_SUB {
        return Err(SearchError::SpaceExceeded { nodes: 0 });
    }
    let idx = |f: &StateFormula| sub.binary_search(f).expect("member of sub(X)");
    let nodes: Vec<Node> = sub
        .iter()
        .map(|f| match f {
            StateFormula::Atom(a) => Node::Atom(sub.binary_search(&StateFormula::NegAtom(a.clone())).ok()),
            StateFormula::And(ys) => Node::And(ys.iter().map(idx).collect()),
            StateFormula::Or(ys) => Node::Or(ys.iter().map(idx).collect()),
            StateFormula::Prob(p, _, _) if p.op == PathOp::G => Node::G(idx(&p.body)),
            _ => Node::Other,
        })
        .collect();
    let bit = |i: usize| -> Mask { 1 << i };
    let x_mask: Mask = xs.iter().map(|f| bit(idx(f))).fold(0, |a, b| a | b);
    let bad_g: Mask = sub
        .iter()
        .enumerate()
        .filter(|(_, f)| matches!(f.as_prob(), Some((p, _, _)) if p.op == PathOp::G) && !c.holds(s, f))
        .map(|(i, _)| bit(i))
        .fold(0, |a, b| a | b);
    let g_bodies = |m: Mask| -> Mask {
        nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| m & bit(*i) != 0)
            .filter_map(|(_, n)| match n {
                Node::G(b) => Some(bit(*b)),
                _ => None,
            })
            .fold(0, |a, b| a | b)
    };
    let required0 = g_bodies(x_mask);

    let mut visited: u64 = 0;
    let mut candidates: Vec<Mask> = Vec::new();
    for m in 0..(1u64 << k) {
        visited += 1;
        if visited > limits.node_budget {
            return Err(SearchError::SpaceExceeded { nodes: visited });
        }
        if m & bad_g != 0 || m & required0 != required0 {
            continue;
        }
        let ok = nodes.iter().enumerate().filter(|(i, _)| m & bit(*i) != 0).all(|(_, n)| match n {
            Node::Atom(Some(neg)) => m & bit(*neg) == 0,
            Node::And(ys) => ys.iter().all(|y| m & bit(*y) != 0),
            Node::Or(ys) => ys.iter().any(|y| m & bit(*y) != 0),
            _ => true,
        });
        if ok {
            candidates.push(m);
        }
    }
    // sets containing X first, larger sets earlier within each group
    candidates.sort_by_key(|&m| (m & x_mask != x_mask, core::cmp::Reverse(m.count_ones()), m));

    let cap = if k >= 63 { limits.max_n } else { limits.max_n.min((1usize << k) - 1) };
    let to_set =
        |m: Mask| -> FormulaSet { (0..k).filter(|i| m & bit(*i) != 0).map(|i| sub[i].clone()).collect() };
    let ctx = Dfs { candidates: &candidates, g_bodies: &g_bodies, x_mask };
    for len in 1..=cap + 1 {
        let mut seq = Vec::with_capacity(len);
        let mut found = None;
        ctx.run(len, required0, &mut seq, &mut visited, limits.node_budget, &mut |seq| {
            let l = ProgressLoop::new(seq.iter().map(|&m| to_set(m)).collect());
            if verify_conditions(c, s, xs, &l).is_ok() {
                found = Some(l);
                true
            } else {
                false
            }
        })?;
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

struct Dfs<'a> {
    candidates: &'a [Mask],
    g_bodies: &'a dyn Fn(Mask) -> Mask,
    x_mask: Mask,
}

impl Dfs<'_> {
    /// Returns `Ok(true)` once `accept` succeeds.
    fn run(
        &self,
        len: usize,
        required: Mask,
        seq: &mut Vec<Mask>,
        visited: &mut u64,
        budget: u64,
        accept: &mut dyn FnMut(&[Mask]) -> bool,
    ) -> Result<bool, SearchError> {
        *visited += 1;
        if *visited > budget {
            return Err(SearchError::SpaceExceeded { nodes: *visited });
        }
        if seq.len() == len {
            let has_x = seq.iter().any(|&m| m & self.x_mask == self.x_mask);
            return Ok(has_x && accept(seq));
        }
        for &m in self.candidates {
            if m & required != required || seq.contains(&m) {
                continue;
            }
            let req = required | (self.g_bodies)(m);
            if seq.iter().any(|&p| p & req != req) || m & req != req {
                continue;
            }
            seq.push(m);
            let done = self.run(len, req, seq, visited, budget, accept)?;
            seq.pop();
            if done {
                return Ok(true);
            }
        }
        Ok(false)
    }
}
