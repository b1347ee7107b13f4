//! Finite Markov chains with exact transition probabilities.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::linalg::{solve, Matrix};
use crate::rational::{is_probability, Rational};

/// Index of a state within its chain.
pub type StateId = usize;

/// A finite Markov chain `(S, P, v)`.
///
/// Only positive transitions are stored, so graph reachability is exactly
/// positive-probability reachability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovChain {
    names: Vec<String>,
    succ: Vec<Vec<(StateId, Rational)>>,
    labels: Vec<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    RowSum { state: String, sum: Rational },
    ZeroEdge { from: String, to: String },
    OutOfRange { from: String, to: String, p: Rational },
    DuplicateEdge { from: String, to: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::RowSum { state, sum } => {
                write!(f, "outgoing probabilities of `{}` sum to {}, not 1", state, sum)
            }
            Diagnostic::ZeroEdge { from, to } => {
                write!(f, "edge `{}` -> `{}` has probability 0; zero edges must be omitted", from, to)
            }
            Diagnostic::OutOfRange { from, to, p } => {
                write!(f, "edge `{}` -> `{}` has probability {} outside (0,1]", from, to, p)
            }
            Diagnostic::DuplicateEdge { from, to } => {
                write!(f, "edge `{}` -> `{}` is listed more than once", from, to)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("state `{0}` declared twice")]
    DuplicateState(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state index {0} out of range")]
    StateOutOfRange(StateId),
    #[error("invalid Markov chain: {}", .0.iter().map(|d| alloc::format!("{}", d)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, Clone, Default)]
pub struct ChainBuilder {
    names: Vec<String>,
    index: BTreeMap<String, StateId>,
    labels: Vec<BTreeSet<String>>,
    edges: Vec<Vec<(StateId, Rational)>>,
    error: Option<ChainError>,
}

impl ChainBuilder {
    pub fn state<I, S>(mut self, name: &str, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.add_state(name, labels);
        self
    }

    pub fn edge(mut self, from: &str, to: &str, p: Rational) -> Self {
        self.add_edge(from, to, p);
        self
    }

    pub fn add_state<I, S>(&mut self, name: &str, labels: I) -> StateId
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if let Some(&id) = self.index.get(name) {
            self.error.get_or_insert(ChainError::DuplicateState(name.into()));
            return id;
        }
        let id = self.names.len();
        self.names.push(name.into());
        self.index.insert(name.into(), id);
        self.labels.push(labels.into_iter().map(Into::into).collect());
        self.edges.push(Vec::new());
        id
    }

    pub fn add_edge(&mut self, from: &str, to: &str, p: Rational) {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&f), Some(&t)) => self.edges[f].push((t, p)),
            (None, _) => {
                self.error.get_or_insert(ChainError::UnknownState(from.into()));
            }
            (_, None) => {
                self.error.get_or_insert(ChainError::UnknownState(to.into()));
            }
        }
    }

    pub fn add_edge_ids(&mut self, from: StateId, to: StateId, p: Rational) {
        self.edges[from].push((to, p));
    }

    /// Builds without checking probabilities; see [`MarkovChain::validate`].
    pub fn build_unchecked(self) -> Result<MarkovChain, ChainError> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let mut succ = self.edges;
        for row in &mut succ {
            row.sort_by_key(|(t, _)| *t);
        }
        Ok(MarkovChain { names: self.names, succ, labels: self.labels })
    }

    pub fn build(self) -> Result<MarkovChain, ChainError> {
        let chain = self.build_unchecked()?;
        chain.validate().map_err(ChainError::Invalid)?;
        Ok(chain)
    }
}

impl MarkovChain {
    pub fn builder() -> ChainBuilder {
        ChainBuilder::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn states(&self) -> core::ops::Range<StateId> {
        0..self.len()
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<StateId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn labels(&self, s: StateId) -> &BTreeSet<String> {
        &self.labels[s]
    }

    pub fn has_label(&self, s: StateId, ap: &str) -> bool {
        self.labels[s].contains(ap)
    }

    /// Outgoing transitions of `s`, sorted by target.
    pub fn successors(&self, s: StateId) -> &[(StateId, Rational)] {
        &self.succ[s]
    }

    pub fn probability(&self, s: StateId, t: StateId) -> Rational {
        self.succ[s].iter().filter(|(u, _)| *u == t).map(|(_, p)| p.clone()).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn check_state(&self, s: StateId) -> Result<(), ChainError> {
        if s < self.len() {
            Ok(())
        } else {
            Err(ChainError::StateOutOfRange(s))
        }
    }

    /// Checks unit row sums and that every stored edge lies in `(0,1]`.
    /// Reports every violation.
    pub fn validate(&self) -> Result<(), Vec<Diagnostic>> {
        let mut diags = Vec::new();
        for s in self.states() {
            let mut seen = BTreeSet::new();
            let mut sum = Rational::zero();
            for (t, p) in &self.succ[s] {
                let (from, to) = (self.names[s].clone(), self.names[*t].clone());
                if !seen.insert(*t) {
                    diags.push(Diagnostic::DuplicateEdge { from: from.clone(), to: to.clone() });
                }
                if p.is_zero() {
                    diags.push(Diagnostic::ZeroEdge { from, to });
                } else if !is_probability(p) {
                    diags.push(Diagnostic::OutOfRange { from, to, p: p.clone() });
                }
                sum += p;
            }
            if !sum.is_one() {
                diags.push(Diagnostic::RowSum { state: self.names[s].clone(), sum });
            }
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(diags)
        }
    }

    /// States reachable from `s` by paths of length ≥ 0.
    pub fn reachable_from(&self, s: StateId) -> Vec<bool> {
        self.reachable_avoiding(s, &vec![false; self.len()])
    }

    /// States reachable from `s` along paths whose intermediate states (all
    /// but the last) lie outside `stop`. A `stop` state is reached but not
    /// expanded.
    pub fn reachable_avoiding(&self, s: StateId, stop: &[bool]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(u) = queue.pop_front() {
            if stop[u] {
                continue;
            }
            for (v, _) in &self.succ[u] {
                if !seen[*v] {
                    seen[*v] = true;
                    queue.push_back(*v);
                }
            }
        }
        seen
    }

    /// States from which some `target` state is reachable.
    pub fn can_reach(&self, target: &[bool]) -> Vec<bool> {
        let mut pred: Vec<Vec<StateId>> = vec![Vec::new(); self.len()];
        for s in self.states() {
            for (t, _) in &self.succ[s] {
                pred[*t].push(s);
            }
        }
        let mut seen = target.to_vec();
        let mut queue: VecDeque<StateId> = self.states().filter(|&s| target[s]).collect();
        while let Some(u) = queue.pop_front() {
            for &p in &pred[u] {
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// Probability, from every state, of eventually visiting `target`.
    pub fn reach_probabilities(&self, target: &[bool]) -> Vec<Rational> {
        let reach = self.can_reach(target);
        let maybe: Vec<StateId> = self.states().filter(|&s| reach[s] && !target[s]).collect();
        let mut result: Vec<Rational> =
            self.states().map(|s| if target[s] { Rational::one() } else { Rational::zero() }).collect();
        if maybe.is_empty() {
            return result;
        }
        let pos = index_map(&maybe, self.len());
        let n = maybe.len();
        let mut a: Matrix = vec![vec![Rational::zero(); n]; n];
        let mut b: Matrix = vec![vec![Rational::zero()]; n];
        for (i, &s) in maybe.iter().enumerate() {
            a[i][i] = Rational::one();
            for (t, p) in &self.succ[s] {
                if target[*t] {
                    b[i][0] += p;
                } else if let Some(j) = pos[*t] {
                    a[i][j] -= p;
                }
            }
        }
        let x = solve(a, b).expect("every maybe-state reaches the target, so I - P is regular");
        for (i, &s) in maybe.iter().enumerate() {
            result[s] = x[i][0].clone();
        }
        result
    }

    /// For each `t` in `stop`, the probability that a run from `s` visits `t`
    /// before any other `stop` state.
    ///
    /// Fails with a witness bottom SCC when `stop` is not reached almost surely.
    pub fn first_passage(
        &self,
        s: StateId,
        stop: &BTreeSet<StateId>,
    ) -> Result<BTreeMap<StateId, Rational>, FirstPassageError> {
        self.check_state(s).map_err(|_| FirstPassageError::StateOutOfRange(s))?;
        let mut out: BTreeMap<StateId, Rational> = stop.iter().map(|&t| (t, Rational::zero())).collect();
        if stop.contains(&s) {
            out.insert(s, Rational::one());
            return Ok(out);
        }
        let mut in_stop = vec![false; self.len()];
        for &t in stop {
            self.check_state(t).map_err(|_| FirstPassageError::StateOutOfRange(t))?;
            in_stop[t] = true;
        }
        let seen = self.reachable_avoiding(s, &in_stop);
        let transient: Vec<StateId> = self.states().filter(|&q| seen[q] && !in_stop[q]).collect();
        let reach = self.can_reach(&in_stop);
        if let Some(&q) = transient.iter().find(|&&q| !reach[q]) {
            let scc = SccDecomposition::new(self);
            let from_q = self.reachable_from(q);
            let bottom = scc
                .components
                .iter()
                .enumerate()
                .find(|(i, c)| scc.is_bottom[*i] && from_q[c[0]])
                .map(|(_, c)| c.clone())
                .expect("every finite chain has a reachable bottom SCC");
            return Err(FirstPassageError::NotAlmostSure { trap: bottom });
        }
        let targets: Vec<StateId> = stop.iter().copied().collect();
        let tpos = index_map(&targets, self.len());
        let pos = index_map(&transient, self.len());
        let n = transient.len();
        let mut a: Matrix = vec![vec![Rational::zero(); n]; n];
        let mut b: Matrix = vec![vec![Rational::zero(); targets.len()]; n];
        for (i, &q) in transient.iter().enumerate() {
            a[i][i] = Rational::one();
            for (t, p) in &self.succ[q] {
                if let Some(k) = tpos[*t] {
                    b[i][k] += p;
                } else if let Some(j) = pos[*t] {
                    a[i][j] -= p;
                }
            }
        }
        let x = solve(a, b).expect("every transient state reaches the stop set");
        let row = pos[s].expect("s is transient");
        for (k, &t) in targets.iter().enumerate() {
            out.insert(t, x[row][k].clone());
        }
        Ok(out)
    }

    /// Renames every state with `prefix` prepended.
    pub fn with_prefix(&self, prefix: &str) -> MarkovChain {
        let mut c = self.clone();
        for n in &mut c.names {
            n.insert_str(0, prefix);
        }
        c
    }
}

fn index_map(items: &[StateId], n: usize) -> Vec<Option<usize>> {
    let mut pos = vec![None; n];
    for (i, &s) in items.iter().enumerate() {
        pos[s] = Some(i);
    }
    pos
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FirstPassageError {
    #[error("state index {0} out of range")]
    StateOutOfRange(StateId),
    #[error("stop set is not reached almost surely; bottom SCC {trap:?} avoids it")]
    NotAlmostSure { trap: Vec<StateId> },
}

/// Strongly connected components of a chain's transition graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccDecomposition {
    /// Components in reverse topological order: every edge leaving a
    /// component points to one listed earlier.
    pub components: Vec<Vec<StateId>>,
    pub is_bottom: Vec<bool>,
    pub component_of: Vec<usize>,
}

impl SccDecomposition {
    /// Iterative Tarjan.
    pub fn new(chain: &MarkovChain) -> Self {
        let n = chain.len();
        const UNVISITED: usize = usize::MAX;
        let mut index = vec![UNVISITED; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut components: Vec<Vec<StateId>> = Vec::new();
        let mut component_of = vec![0; n];
        let mut next = 0;

        for root in 0..n {
            if index[root] != UNVISITED {
                continue;
            }
            // (state, next successor position)
            let mut call: Vec<(StateId, usize)> = vec![(root, 0)];
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut i)) = call.last_mut() {
                let succ = chain.successors(v);
                if *i < succ.len() {
                    let w = succ[*i].0;
                    *i += 1;
                    if index[w] == UNVISITED {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        component_of[w] = components.len();
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    components.push(comp);
                }
            }
        }
        let is_bottom = components
            .iter()
            .enumerate()
            .map(|(ci, comp)| {
                comp.iter().all(|&s| chain.successors(s).iter().all(|(t, _)| component_of[*t] == ci))
            })
            .collect();
        SccDecomposition { components, is_bottom, component_of }
    }

    pub fn in_bottom(&self, s: StateId) -> bool {
        self.is_bottom[self.component_of[s]]
    }

    pub fn bottom_states(&self) -> Vec<bool> {
        (0..self.component_of.len()).map(|s| self.in_bottom(s)).collect()
    }

    /// Components in topological order (sources first).
    pub fn topological(&self) -> impl Iterator<Item = &Vec<StateId>> {
        self.components.iter().rev()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    /// The chain of the running example: s→t:1, t→s:3/5, t→u:2/5, u→u:1.
    pub(crate) fn running_chain() -> MarkovChain {
        MarkovChain::builder()
            .state("s", [] as [&str; 0])
            .state("t", ["a"])
            .state("u", ["a"])
            .edge("s", "t", int(1))
            .edge("t", "s", ratio(3, 5))
            .edge("t", "u", ratio(2, 5))
            .edge("u", "u", int(1))
            .build()
            .unwrap()
    }

    #[test]
    fn running_chain_is_valid() {
        assert!(running_chain().validate().is_ok());
    }

    #[test]
    fn row_sum_diagnostic_names_state() {
        let c = MarkovChain::builder()
            .state("x", [] as [&str; 0])
            .edge("x", "x", ratio(9, 10))
            .build_unchecked()
            .unwrap();
        let d = c.validate().unwrap_err();
        assert_eq!(d, vec![Diagnostic::RowSum { state: "x".into(), sum: ratio(9, 10) }]);
        assert!(d[0].to_string().contains("`x`"));
    }

    #[test]
    fn zero_edge_diagnostic() {
        let c = MarkovChain::builder()
            .state("x", [] as [&str; 0])
            .state("y", [] as [&str; 0])
            .edge("x", "x", int(1))
            .edge("x", "y", int(0))
            .edge("y", "y", int(1))
            .build_unchecked()
            .unwrap();
        let d = c.validate().unwrap_err();
        assert_eq!(d, vec![Diagnostic::ZeroEdge { from: "x".into(), to: "y".into() }]);
        assert!(matches!(
            MarkovChain::builder()
                .state("x", [] as [&str; 0])
                .edge("x", "x", ratio(1, 2))
                .edge("x", "x", ratio(1, 2))
                .build(),
            Err(ChainError::Invalid(_))
        ));
    }

    #[test]
    fn builder_rejects_unknown_and_duplicate_states() {
        let e = MarkovChain::builder().state("x", [] as [&str; 0]).edge("x", "z", int(1)).build();
        assert_eq!(e, Err(ChainError::UnknownState("z".into())));
        let e = MarkovChain::builder().state("x", [] as [&str; 0]).state("x", [] as [&str; 0]).build();
        assert_eq!(e, Err(ChainError::DuplicateState("x".into())));
    }

    #[test]
    fn running_chain_sccs() {
        let d = SccDecomposition::new(&running_chain());
        assert_eq!(d.components, vec![vec![2], vec![0, 1]]);
        assert_eq!(d.is_bottom, vec![true, false]);
    }

    #[test]
    fn self_loop_and_cycle_are_bottom() {
        let one = MarkovChain::builder().state("x", [] as [&str; 0]).edge("x", "x", int(1)).build().unwrap();
        let d = SccDecomposition::new(&one);
        assert_eq!((d.components.len(), d.is_bottom[0]), (1, true));

        let cycle = MarkovChain::builder()
            .state("x", [] as [&str; 0])
            .state("y", [] as [&str; 0])
            .state("z", [] as [&str; 0])
            .edge("x", "y", int(1))
            .edge("y", "z", int(1))
            .edge("z", "x", int(1))
            .build()
            .unwrap();
        let d = SccDecomposition::new(&cycle);
        assert_eq!(d.components, vec![vec![0, 1, 2]]);
        assert!(d.is_bottom[0]);
    }

    #[test]
    fn first_passage_examples() {
        let m = running_chain();
        let y = m.first_passage(0, &[2].into_iter().collect()).unwrap();
        assert_eq!(y, [(2, int(1))].into_iter().collect());

        let y = m.first_passage(0, &[0, 2].into_iter().collect()).unwrap();
        assert_eq!(y, [(0, int(1)), (2, int(0))].into_iter().collect());

        let coin = MarkovChain::builder()
            .state("s", [] as [&str; 0])
            .state("b1", [] as [&str; 0])
            .state("b2", [] as [&str; 0])
            .edge("s", "b1", ratio(1, 2))
            .edge("s", "b2", ratio(1, 2))
            .edge("b1", "b1", int(1))
            .edge("b2", "b2", int(1))
            .build()
            .unwrap();
        let y = coin.first_passage(0, &[1, 2].into_iter().collect()).unwrap();
        assert_eq!(y, [(1, ratio(1, 2)), (2, ratio(1, 2))].into_iter().collect());
    }

    #[test]
    fn first_passage_certificate() {
        let m = running_chain();
        // {t} is left towards u with probability 2/5 and never revisited from u.
        let e = m.first_passage(0, &[1].into_iter().collect());
        assert_eq!(e, Ok([(1, int(1))].into_iter().collect()));
        let e = m.first_passage(1, &[0].into_iter().collect()).unwrap_err();
        assert_eq!(e, FirstPassageError::NotAlmostSure { trap: vec![2] });
    }

    #[test]
    fn reach_probabilities_running_chain() {
        let m = running_chain();
        // reaching ¬a from t: geometric series 3/5 · Σ 0 ... = 3/5
        let p = m.reach_probabilities(&[true, false, false]);
        assert_eq!(p, vec![int(1), ratio(3, 5), int(0)]);
    }
}
