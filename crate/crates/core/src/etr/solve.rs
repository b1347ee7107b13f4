//! Driving candidates through refutation, a cheap probe, and an external
//! solver, and turning a solution back into a chain.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::ControlFlow;

use super::encode::{check_assignment, encode, interval_refutation, EtrSystem};
use super::enumerate::{for_each_candidate, Candidate, EnumMode, MAX_VERTICES};
use super::{f_normal_form, FFormula};
use crate::formula::StateFormula;
use crate::markov::{MarkovChain, StateId};
use crate::modelcheck::Checker;
use crate::rational::{convergents, parse_rational, ratio, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendReply {
    /// Everything the solver wrote to its output.
    Output(String),
    Timeout,
}

/// The solver could not be run at all.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("solver backend: {0}")]
pub struct BackendError(pub String);

pub trait SolverBackend {
    /// Runs one script. `index` numbers candidates in enumeration order.
    fn run(&mut self, index: usize, script: &str) -> Result<BackendReply, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelValue {
    Exact(Rational),
    /// A decimal the solver marked as truncated.
    Approx(Rational),
    /// Anything else, such as an algebraic number.
    Other(String),
}

impl ModelValue {
    pub fn rational(&self) -> Option<&Rational> {
        match self {
            ModelValue::Exact(r) | ModelValue::Approx(r) => Some(r),
            ModelValue::Other(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverReply {
    pub status: SolverStatus,
    /// Values from the `get-value` response, by variable name.
    pub values: BTreeMap<String, ModelValue>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl core::fmt::Display for Sexp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(xs) => {
                f.write_str("(")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{}", x)?;
                }
                f.write_str(")")
            }
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_string = false;
    for ch in text.chars() {
        if in_string {
            cur.push(ch);
            if ch == '"' {
                in_string = false;
            }
            continue;
        }
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(core::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(core::mem::take(&mut cur));
                }
            }
            '"' => {
                in_string = true;
                cur.push(ch);
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, String> {
    let mut stack: Vec<Vec<Sexp>> = alloc::vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop().filter(|_| !stack.is_empty()).ok_or("unbalanced `)`")?;
                stack.last_mut().unwrap().push(Sexp::List(done));
            }
            _ => stack.last_mut().unwrap().push(Sexp::Atom(t.clone())),
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced `(`".into());
    }
    Ok(stack.pop().unwrap())
}

fn value_of(e: &Sexp) -> Option<(Rational, bool)> {
    match e {
        Sexp::Atom(a) => {
            let (digits, approx) = match a.strip_suffix('?') {
                Some(d) => (d, true),
                None => (a.as_str(), false),
            };
            parse_rational(digits).ok().map(|r| (r, approx))
        }
        Sexp::List(xs) => {
            let Some(Sexp::Atom(head)) = xs.first() else { return None };
            let args: Vec<(Rational, bool)> = xs[1..].iter().map(value_of).collect::<Option<_>>()?;
            let approx = args.iter().any(|a| a.1);
            let mut vals = args.into_iter().map(|a| a.0);
            let r = match (head.as_str(), xs.len() - 1) {
                ("-", 1) => -vals.next()?,
                ("-", _) => {
                    let first = vals.next()?;
                    vals.fold(first, |acc, v| acc - v)
                }
                ("+", _) => vals.sum(),
                ("*", _) => vals.product(),
                ("/", 2) => {
                    let (a, b) = (vals.next()?, vals.next()?);
                    if b == Rational::from_integer(0.into()) {
                        return None;
                    }
                    a / b
                }
                _ => return None,
            };
            Some((r, approx))
        }
    }
}

/// Parses the status line and, after `sat`, the `((name value) …)` response.
/// Values that are not rational expressions are kept as text.
pub fn parse_reply(text: &str) -> Result<SolverReply, String> {
    let exprs = parse_sexps(&tokenize(text))?;
    let status = match exprs.first() {
        Some(Sexp::Atom(a)) if a == "sat" => SolverStatus::Sat,
        Some(Sexp::Atom(a)) if a == "unsat" => SolverStatus::Unsat,
        Some(Sexp::Atom(a)) if a == "unknown" => SolverStatus::Unknown,
        Some(e) => return Err(alloc::format!("unexpected solver output `{}`", e)),
        None => return Err("empty solver output".into()),
    };
    let mut values = BTreeMap::new();
    if status == SolverStatus::Sat {
        for e in &exprs[1..] {
            let Sexp::List(pairs) = e else { continue };
            for p in pairs {
                if let Sexp::List(kv) = p {
                    if let [Sexp::Atom(name), v] = &kv[..] {
                        let mv = match value_of(v) {
                            Some((r, false)) => ModelValue::Exact(r),
                            Some((r, true)) => ModelValue::Approx(r),
                            None => ModelValue::Other(alloc::format!("{}", v)),
                        };
                        values.insert(name.clone(), mv);
                    }
                }
            }
        }
    }
    Ok(SolverReply { status, values })
}

fn renormalize(sys: &EtrSystem, x: &mut [Rational]) {
    for v in 0..sys.vertices {
        let out: Vec<usize> = (0..sys.edges.len()).filter(|&e| sys.edges[e].0 == v).collect();
        if let Some((&last, rest)) = out.split_last() {
            let s: Rational = rest.iter().map(|&e| &x[e]).sum();
            x[last] = ratio(1, 1) - s;
        }
    }
}

/// Edge values passing [`check_assignment`]: `x` itself, or else the first
/// depth of continued-fraction convergents (last edge of each vertex taking
/// the remainder) that passes.
pub fn rationalize(sys: &EtrSystem, x: &[Rational]) -> Option<Vec<Rational>> {
    if check_assignment(sys, x) == Ok(true) {
        return Some(x.to_vec());
    }
    let convs: Vec<Vec<Rational>> = x.iter().map(convergents).collect();
    let depth = convs.iter().map(Vec::len).max().unwrap_or(0);
    (0..depth).find_map(|k| {
        let mut y: Vec<Rational> = convs.iter().map(|c| c[k.min(c.len() - 1)].clone()).collect();
        renormalize(sys, &mut y);
        (check_assignment(sys, &y) == Ok(true)).then_some(y)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SatOptions {
    pub mode: EnumMode,
    /// Try `x = 1/outdegree` before calling the solver.
    pub uniform_probe: bool,
}

impl Default for SatOptions {
    fn default() -> Self {
        SatOptions { mode: EnumMode::Rooted, uniform_probe: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SatStats {
    pub candidates: usize,
    pub interval_refuted: usize,
    pub probe_hits: usize,
    pub solver_calls: usize,
    pub solver_unsat: usize,
    /// Candidates neither refuted nor solved.
    pub undecided: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    Model { chain: MarkovChain, entry: StateId, candidate: Candidate, assignment: Vec<Rational> },
    UnsatUpToN,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatReport {
    pub outcome: SatOutcome,
    pub stats: SatStats,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SatError {
    #[error("bound {0} outside 1..={max}", max = MAX_VERTICES)]
    Bound(usize),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("candidate {candidate}: {message}")]
    Protocol { candidate: usize, message: String },
    #[error("candidate {candidate}: reconstructed chain fails the formula")]
    Reconstruction { candidate: usize },
}

fn reconstruct(c: &Candidate, nf: &FFormula, x: &[Rational]) -> Option<(MarkovChain, StateId)> {
    let mut b = MarkovChain::builder();
    for v in 0..c.vertices {
        let labels: Vec<String> = c
            .labels
            .iter()
            .filter_map(|(f, m)| match f {
                FFormula::Atom(a) if m >> v & 1 == 1 => Some(a.clone()),
                _ => None,
            })
            .collect();
        b.add_state(&alloc::format!("v{}", v + 1), labels);
    }
    for (&(u, t), p) in c.edges.iter().zip(x) {
        b.add_edge_ids(u, t, p.clone());
    }
    let chain = b.build().ok()?;
    let entry = (0..c.vertices).find(|&v| c.holds(nf, v))?;
    Some((chain, entry))
}

/// Searches for a model of `phi` with at most `n` states.
///
/// Returns `UnsatUpToN` only when every candidate was refuted, and `Unknown`
/// when some candidate could not be decided (no backend, a timeout, an
/// `unknown` reply, or values that do not rationalise).
pub fn solve_bounded_sat(
    phi: &StateFormula,
    n: usize,
    mut backend: Option<&mut dyn SolverBackend>,
    options: SatOptions,
) -> Result<SatReport, SatError> {
    if n == 0 || n > MAX_VERTICES {
        return Err(SatError::Bound(n));
    }
    let nf = f_normal_form(phi);
    let mut stats = SatStats::default();
    let mut found: Option<SatOutcome> = None;
    let mut error: Option<SatError> = None;

    let _ = for_each_candidate(&nf, n, options.mode, |c| {
        let index = stats.candidates;
        stats.candidates += 1;
        let sys = encode(&c, &nf);
        if interval_refutation(&sys).is_some() {
            stats.interval_refuted += 1;
            return ControlFlow::Continue(());
        }
        let mut solution = None;
        if options.uniform_probe {
            let x: Vec<Rational> =
                c.edges.iter().map(|&(u, _)| ratio(1, c.successors(u).count() as i64)).collect();
            if check_assignment(&sys, &x) == Ok(true) {
                stats.probe_hits += 1;
                solution = Some(x);
            }
        }
        if solution.is_none() {
            let Some(be) = backend.as_deref_mut() else {
                stats.undecided += 1;
                return ControlFlow::Continue(());
            };
            stats.solver_calls += 1;
            let text = match be.run(index, &sys.to_smtlib()) {
                Ok(BackendReply::Output(t)) => t,
                Ok(BackendReply::Timeout) => {
                    stats.undecided += 1;
                    return ControlFlow::Continue(());
                }
                Err(e) => {
                    error = Some(e.into());
                    return ControlFlow::Break(());
                }
            };
            let reply = match parse_reply(&text) {
                Ok(r) => r,
                Err(message) => {
                    error = Some(SatError::Protocol { candidate: index, message });
                    return ControlFlow::Break(());
                }
            };
            match reply.status {
                SolverStatus::Unsat => {
                    stats.solver_unsat += 1;
                    return ControlFlow::Continue(());
                }
                SolverStatus::Unknown => {
                    stats.undecided += 1;
                    return ControlFlow::Continue(());
                }
                SolverStatus::Sat => {}
            }
            let raw: Option<Vec<Rational>> = (0..c.edges.len())
                .map(|i| reply.values.get(&alloc::format!("x{}", i)).and_then(|v| v.rational().cloned()))
                .collect();
            solution = raw.and_then(|x| rationalize(&sys, &x));
            if solution.is_none() {
                stats.undecided += 1;
                return ControlFlow::Continue(());
            }
        }
        let x = solution.expect("set above");
        match reconstruct(&c, &nf, &x) {
            Some((chain, entry)) if Checker::new(&chain).holds(entry, phi) => {
                found = Some(SatOutcome::Model { chain, entry, candidate: c, assignment: x });
            }
            _ => error = Some(SatError::Reconstruction { candidate: index }),
        }
        ControlFlow::Break(())
    });

    if let Some(e) = error {
        return Err(e);
    }
    let outcome = match found {
        Some(m) => m,
        None if stats.undecided == 0 => SatOutcome::UnsatUpToN,
        None => SatOutcome::Unknown,
    };
    Ok(SatReport { outcome, stats })
}
