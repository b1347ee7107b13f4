//! The polynomial system of a candidate, its text form, and exact checking.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use num_traits::{One, Signed, Zero};

use super::enumerate::{full, reaching, Candidate};
use super::{FFormula, Rel};
use crate::linalg::solve_vec;
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Probability of edge `i`.
    X(usize),
    /// Reachability value of block `b` at vertex `v`.
    Y(usize, usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i),
            Var::Y(b, v) => write!(f, "y{}_{}", b, v),
        }
    }
}

/// `coef · Π vars`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub coef: Rational,
    pub vars: Vec<Var>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl From<Rel> for Relation {
    fn from(r: Rel) -> Self {
        match r {
            Rel::Ge => Relation::Ge,
            Rel::Gt => Relation::Gt,
            Rel::Le => Relation::Le,
            Rel::Lt => Relation::Lt,
        }
    }
}

impl Relation {
    fn holds(self, a: &Rational, b: &Rational) -> bool {
        match self {
            Relation::Eq => a == b,
            Relation::Lt => a < b,
            Relation::Le => a <= b,
            Relation::Gt => a > b,
            Relation::Ge => a >= b,
        }
    }

    fn smt(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        }
    }
}

/// `Σ lhs rel rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub lhs: Vec<Term>,
    pub rel: Relation,
    pub rhs: Rational,
}

impl Constraint {
    fn var(v: Var, rel: Relation, rhs: Rational) -> Self {
        Constraint { lhs: alloc::vec![Term { coef: Rational::one(), vars: alloc::vec![v] }], rel, rhs }
    }

    /// `Some((v, rel, rhs))` when the constraint is `v rel rhs`.
    pub fn as_bound(&self) -> Option<(Var, Relation, &Rational)> {
        match &self.lhs[..] {
            [t] if t.coef.is_one() && t.vars.len() == 1 => Some((t.vars[0], self.rel, &self.rhs)),
            _ => None,
        }
    }
}

/// One group of `F`-subformulae sharing a body, and one `y` per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YBlock {
    pub body: FFormula,
    pub members: Vec<FFormula>,
    /// `V(body)`: `y = 1`.
    pub target: u32,
    /// Vertices with no path to the target: `y = 0`.
    pub out: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtrSystem {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub blocks: Vec<YBlock>,
    pub constraints: Vec<Constraint>,
}

/// Builds the system of a candidate.
///
/// Per edge `0 < x ≤ 1`; per vertex the outgoing `x` sum to one; per block
/// the reachability equations; per member and vertex `y ⋈ r` where labelled
/// and its negation elsewhere.
pub fn encode(c: &Candidate, phi: &FFormula) -> EtrSystem {
    debug_assert!(c.is_well_formed());
    let m = c.vertices;
    let mut cs = Vec::new();
    for i in 0..c.edges.len() {
        cs.push(Constraint::var(Var::X(i), Relation::Gt, Rational::zero()));
        cs.push(Constraint::var(Var::X(i), Relation::Le, Rational::one()));
    }
    for v in 0..m {
        let lhs = c
            .successors(v)
            .map(|(i, _)| Term { coef: Rational::one(), vars: alloc::vec![Var::X(i)] })
            .collect();
        cs.push(Constraint { lhs, rel: Relation::Eq, rhs: Rational::one() });
    }

    let mut by_body: BTreeMap<FFormula, Vec<FFormula>> = BTreeMap::new();
    for f in phi.f_subformulas() {
        if let FFormula::F(b, _, _) = &f {
            by_body.entry((**b).clone()).or_default().push(f.clone());
        }
    }
    let mut blocks = Vec::new();
    for (k, (body, members)) in by_body.into_iter().enumerate() {
        let target = c.label(&body);
        let out = full(m) & !reaching(m, &c.edges, target);
        for v in 0..m {
            let y = Var::Y(k, v);
            if target >> v & 1 == 1 {
                cs.push(Constraint::var(y, Relation::Eq, Rational::one()));
            } else if out >> v & 1 == 1 {
                cs.push(Constraint::var(y, Relation::Eq, Rational::zero()));
            } else {
                let mut lhs = alloc::vec![Term { coef: Rational::one(), vars: alloc::vec![y] }];
                lhs.extend(c.successors(v).map(|(i, t)| Term {
                    coef: -Rational::one(),
                    vars: alloc::vec![Var::X(i), Var::Y(k, t)],
                }));
                cs.push(Constraint { lhs, rel: Relation::Eq, rhs: Rational::zero() });
            }
        }
        for f in &members {
            let FFormula::F(_, rel, r) = f else { unreachable!() };
            for v in 0..m {
                let rel = if c.holds(f, v) { *rel } else { rel.negate() };
                cs.push(Constraint::var(Var::Y(k, v), rel.into(), r.clone()));
            }
        }
        blocks.push(YBlock { body, members, target, out });
    }
    EtrSystem { vertices: m, edges: c.edges.clone(), blocks, constraints: cs }
}

fn smt_rational(r: &Rational) -> String {
    let body = if r.is_integer() {
        alloc::format!("{}", r.numer().abs())
    } else {
        alloc::format!("(/ {} {})", r.numer().abs(), r.denom())
    };
    if r.is_negative() {
        alloc::format!("(- {})", body)
    } else {
        body
    }
}

impl EtrSystem {
    pub fn variables(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = (0..self.edges.len()).map(Var::X).collect();
        for b in 0..self.blocks.len() {
            vs.extend((0..self.vertices).map(|v| Var::Y(b, v)));
        }
        vs
    }

    /// The system as a script for nonlinear real arithmetic, asking for the
    /// edge values on `sat`.
    pub fn to_smtlib(&self) -> String {
        let mut s = String::from("(set-logic QF_NRA)\n");
        for v in self.variables() {
            let _ = writeln!(s, "(declare-const {} Real)", v);
        }
        for c in &self.constraints {
            let terms: Vec<String> = c
                .lhs
                .iter()
                .map(|t| {
                    let mut factors: Vec<String> = Vec::new();
                    if !t.coef.is_one() {
                        factors.push(smt_rational(&t.coef));
                    }
                    factors.extend(t.vars.iter().map(|v| alloc::format!("{}", v)));
                    if factors.len() == 1 {
                        factors.pop().unwrap()
                    } else {
                        alloc::format!("(* {})", factors.join(" "))
                    }
                })
                .collect();
            let lhs = match terms.len() {
                0 => String::from("0"),
                1 => terms[0].clone(),
                _ => alloc::format!("(+ {})", terms.join(" ")),
            };
            let _ = writeln!(s, "(assert ({} {} {}))", c.rel.smt(), lhs, smt_rational(&c.rhs));
        }
        s.push_str("(check-sat)\n");
        if !self.edges.is_empty() {
            let xs: Vec<String> = (0..self.edges.len()).map(|i| alloc::format!("x{}", i)).collect();
            let _ = writeln!(s, "(get-value ({}))", xs.join(" "));
        }
        s
    }
}

/// The first `y` whose bounds leave no value in its forced range (1 on the
/// target, 0 where the target is unreachable, `(0,1]` elsewhere).
pub fn interval_refutation(sys: &EtrSystem) -> Option<Var> {
    // (value, strict)
    type End = (Rational, bool);
    let mut ranges: BTreeMap<Var, (End, End)> = BTreeMap::new();
    for (k, b) in sys.blocks.iter().enumerate() {
        for v in 0..sys.vertices {
            let r = if b.target >> v & 1 == 1 {
                ((Rational::one(), false), (Rational::one(), false))
            } else if b.out >> v & 1 == 1 {
                ((Rational::zero(), false), (Rational::zero(), false))
            } else {
                ((Rational::zero(), true), (Rational::one(), false))
            };
            ranges.insert(Var::Y(k, v), r);
        }
    }
    let raise = |lo: &mut End, x: &Rational, strict: bool| {
        if *x > lo.0 || (*x == lo.0 && strict) {
            *lo = (x.clone(), strict || (*x == lo.0 && lo.1));
        }
    };
    let lower = |hi: &mut End, x: &Rational, strict: bool| {
        if *x < hi.0 || (*x == hi.0 && strict) {
            *hi = (x.clone(), strict || (*x == hi.0 && hi.1));
        }
    };
    for c in &sys.constraints {
        let Some((var @ Var::Y(..), rel, x)) = c.as_bound() else { continue };
        let (lo, hi) = ranges.get_mut(&var).expect("declared");
        match rel {
            Relation::Eq => {
                raise(lo, x, false);
                lower(hi, x, false);
            }
            Relation::Ge => raise(lo, x, false),
            Relation::Gt => raise(lo, x, true),
            Relation::Le => lower(hi, x, false),
            Relation::Lt => lower(hi, x, true),
        }
    }
    ranges.into_iter().find(|(_, (lo, hi))| lo.0 > hi.0 || (lo.0 == hi.0 && (lo.1 || hi.1))).map(|(v, _)| v)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssignmentError {
    #[error("expected {expected} edge values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("x{edge} = {value} is outside (0,1]")]
    Range { edge: usize, value: Rational },
    #[error("outgoing values of vertex {vertex} sum to {sum}")]
    Distr { vertex: usize, sum: Rational },
}

fn check_edges(sys: &EtrSystem, x: &[Rational]) -> Result<(), AssignmentError> {
    if x.len() != sys.edges.len() {
        return Err(AssignmentError::Arity { expected: sys.edges.len(), got: x.len() });
    }
    if let Some((edge, value)) = x.iter().enumerate().find(|(_, v)| !v.is_positive() || **v > Rational::one())
    {
        return Err(AssignmentError::Range { edge, value: value.clone() });
    }
    for vertex in 0..sys.vertices {
        let sum: Rational = sys.edges.iter().zip(x).filter(|(e, _)| e.0 == vertex).map(|(_, v)| v).sum();
        if !sum.is_one() {
            return Err(AssignmentError::Distr { vertex, sum });
        }
    }
    Ok(())
}

/// The unique `y` of every block under edge values `x`.
pub fn solve_blocks(sys: &EtrSystem, x: &[Rational]) -> Result<Vec<Vec<Rational>>, AssignmentError> {
    check_edges(sys, x)?;
    let m = sys.vertices;
    let mut out = Vec::new();
    for b in &sys.blocks {
        let other: Vec<usize> = (0..m).filter(|v| (b.target | b.out) >> v & 1 == 0).collect();
        let pos: BTreeMap<usize, usize> = other.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let k = other.len();
        let mut a = alloc::vec![alloc::vec![Rational::zero(); k]; k];
        let mut rhs = alloc::vec![Rational::zero(); k];
        for (i, &v) in other.iter().enumerate() {
            a[i][i] = Rational::one();
            for (e, &(_, t)) in sys.edges.iter().enumerate().filter(|(_, e)| e.0 == v) {
                if b.target >> t & 1 == 1 {
                    rhs[i] += &x[e];
                } else if let Some(&j) = pos.get(&t) {
                    a[i][j] -= &x[e];
                }
            }
        }
        // every remaining vertex reaches the target through positive edges
        let sol = solve_vec(a, rhs).expect("reachability system is nonsingular");
        let y = (0..m)
            .map(|v| {
                if b.target >> v & 1 == 1 {
                    Rational::one()
                } else {
                    pos.get(&v).map_or_else(Rational::zero, |&i| sol[i].clone())
                }
            })
            .collect();
        out.push(y);
    }
    Ok(out)
}

/// Solves the `y` exactly for the given `x` and evaluates every constraint.
pub fn check_assignment(sys: &EtrSystem, x: &[Rational]) -> Result<bool, AssignmentError> {
    let ys = solve_blocks(sys, x)?;
    let value = |v: &Var| match v {
        Var::X(i) => &x[*i],
        Var::Y(b, u) => &ys[*b][*u],
    };
    Ok(sys.constraints.iter().all(|c| {
        let lhs: Rational =
            c.lhs.iter().map(|t| t.vars.iter().fold(t.coef.clone(), |acc, v| acc * value(v))).sum();
        c.rel.holds(&lhs, &c.rhs)
    }))
}
