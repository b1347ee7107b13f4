//! Concrete syntax and normalization into core form.
//!
//! ```text
//! phi  := disj
//! disj := conj { "|" conj }
//! conj := unit { "&" unit }
//! unit := ident | "!" unit | "(" phi ")"
//!       | ("F"|"G") cmp num "[" phi "]"
//! cmp  := ">=" | ">" | "<=" | "<" | "="
//! num  := decimal | integer "/" integer
//! ```

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed};

use super::{Cmp, PathOp, StateFormula};
use crate::rational::{parse_rational, Rational, RationalError};

/// 1-based source position. `Pos::default()` marks synthesized nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceCmp {
    Ge,
    Gt,
    Le,
    Lt,
    /// Only as `=1`.
    Eq,
}

impl SurfaceCmp {
    fn negate(self) -> SurfaceCmp {
        match self {
            SurfaceCmp::Ge | SurfaceCmp::Eq => SurfaceCmp::Lt,
            SurfaceCmp::Gt => SurfaceCmp::Le,
            SurfaceCmp::Le => SurfaceCmp::Gt,
            SurfaceCmp::Lt => SurfaceCmp::Ge,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            SurfaceCmp::Ge => ">=",
            SurfaceCmp::Gt => ">",
            SurfaceCmp::Le => "<=",
            SurfaceCmp::Lt => "<",
            SurfaceCmp::Eq => "=",
        }
    }
}

/// Parsed formula before normalization: negation may wrap any subformula
/// and all comparisons are allowed.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceFormula {
    Atom { name: String, pos: Pos },
    Not { inner: Box<SurfaceFormula>, pos: Pos },
    And(Vec<SurfaceFormula>),
    Or(Vec<SurfaceFormula>),
    Prob { op: PathOp, cmp: SurfaceCmp, bound: Rational, body: Box<SurfaceFormula>, pos: Pos },
}

impl From<&StateFormula> for SurfaceFormula {
    fn from(f: &StateFormula) -> Self {
        let pos = Pos::default();
        match f {
            StateFormula::Atom(a) => SurfaceFormula::Atom { name: a.clone(), pos },
            StateFormula::NegAtom(a) => {
                SurfaceFormula::Not { inner: Box::new(SurfaceFormula::Atom { name: a.clone(), pos }), pos }
            }
            StateFormula::And(xs) => SurfaceFormula::And(xs.iter().map(Into::into).collect()),
            StateFormula::Or(xs) => SurfaceFormula::Or(xs.iter().map(Into::into).collect()),
            StateFormula::Prob(p, cmp, r) => SurfaceFormula::Prob {
                op: p.op,
                cmp: match cmp {
                    Cmp::Ge => SurfaceCmp::Ge,
                    Cmp::Gt => SurfaceCmp::Gt,
                },
                bound: r.clone(),
                body: Box::new((&p.body).into()),
                pos,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Unexpected { found: String, expected: &'static str },
    BoundOutOfRange(Rational),
    BadNumber(RationalError),
    EqualityNotOne(Rational),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {kind}")]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Unexpected { found, expected } => {
                write!(f, "expected {}, found {}", expected, found)
            }
            ParseErrorKind::BoundOutOfRange(r) => {
                write!(f, "probability bound {} outside [0,1]", r)
            }
            ParseErrorKind::BadNumber(e) => write!(f, "{}", e),
            ParseErrorKind::EqualityNotOne(r) => {
                write!(f, "`=` is only allowed as `=1`, found `={}`", r)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizeError {
    #[error("{pos}: `{op}{cmp}{bound}` normalizes to the trivial constraint `{core}`; trivial constraints >=0 and >1 are not allowed")]
    TrivialBound { pos: Pos, op: PathOp, cmp: &'static str, bound: Rational, core: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormulaError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Normalize(Box<NormalizeError>),
}

impl From<NormalizeError> for FormulaError {
    fn from(e: NormalizeError) -> Self {
        FormulaError::Normalize(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Sym(&'static str),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{}`", s),
            Tok::Num(s) => write!(f, "number `{}`", s),
            Tok::Sym(s) => write!(f, "`{}`", s),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            Tok::Num(chars[start..i].iter().collect())
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let sym = match two.as_str() {
                ">=" => Some(">="),
                "<=" => Some("<="),
                _ => None,
            };
            if let Some(s) = sym {
                i += 2;
                Tok::Sym(s)
            } else {
                let s = match c {
                    '>' => ">",
                    '<' => "<",
                    '=' => "=",
                    '!' => "!",
                    '&' => "&",
                    '|' => "|",
                    '(' => "(",
                    ')' => ")",
                    '[' => "[",
                    ']' => "]",
                    '/' => "/",
                    _ => {
                        return Err(ParseError {
                            pos,
                            kind: ParseErrorKind::Unexpected {
                                found: alloc::format!("character `{}`", c),
                                expected: "a formula",
                            },
                        })
                    }
                };
                i += 1;
                Tok::Sym(s)
            }
        };
        col += i - start;
        out.push((tok, pos));
    }
    out.push((Tok::End, Pos { line, column: col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &'static str) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos(),
            kind: ParseErrorKind::Unexpected { found: self.peek().to_string(), expected },
        })
    }

    fn expect(&mut self, sym: &'static str, expected: &'static str) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(sym) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(expected)
        }
    }

    fn phi(&mut self) -> Result<SurfaceFormula, ParseError> {
        let mut parts = alloc::vec![self.conj()?];
        while *self.peek() == Tok::Sym("|") {
            self.bump();
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { SurfaceFormula::Or(parts) })
    }

    fn conj(&mut self) -> Result<SurfaceFormula, ParseError> {
        let mut parts = alloc::vec![self.unit()?];
        while *self.peek() == Tok::Sym("&") {
            self.bump();
            parts.push(self.unit()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { SurfaceFormula::And(parts) })
    }

    fn is_cmp(t: &Tok) -> bool {
        matches!(t, Tok::Sym(">=" | ">" | "<=" | "<" | "="))
    }

    fn unit(&mut self) -> Result<SurfaceFormula, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Sym("!") => {
                self.bump();
                let inner = self.unit()?;
                Ok(SurfaceFormula::Not { inner: Box::new(inner), pos })
            }
            Tok::Sym("(") => {
                self.bump();
                let inner = self.phi()?;
                self.expect(")", "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) if (name == "F" || name == "G") && Self::is_cmp(self.peek2()) => {
                self.bump();
                let op = if name == "F" { PathOp::F } else { PathOp::G };
                self.prob(op, pos)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(SurfaceFormula::Atom { name, pos })
            }
            _ => self.unexpected("an atom, `!`, `(`, `F` or `G`"),
        }
    }

    fn prob(&mut self, op: PathOp, pos: Pos) -> Result<SurfaceFormula, ParseError> {
        let cmp = match self.bump().0 {
            Tok::Sym(">=") => SurfaceCmp::Ge,
            Tok::Sym(">") => SurfaceCmp::Gt,
            Tok::Sym("<=") => SurfaceCmp::Le,
            Tok::Sym("<") => SurfaceCmp::Lt,
            Tok::Sym("=") => SurfaceCmp::Eq,
            _ => unreachable!("checked by is_cmp"),
        };
        let num_pos = self.pos();
        let bound = self.number()?;
        if bound.is_negative() || bound > Rational::one() {
            return Err(ParseError { pos: num_pos, kind: ParseErrorKind::BoundOutOfRange(bound) });
        }
        if cmp == SurfaceCmp::Eq && !bound.is_one() {
            return Err(ParseError { pos: num_pos, kind: ParseErrorKind::EqualityNotOne(bound) });
        }
        self.expect("[", "`[`")?;
        let body = self.phi()?;
        self.expect("]", "`]`")?;
        Ok(SurfaceFormula::Prob { op, cmp, bound, body: Box::new(body), pos })
    }

    fn number(&mut self) -> Result<Rational, ParseError> {
        let pos = self.pos();
        let Tok::Num(first) = self.peek().clone() else {
            return self.unexpected("a probability bound");
        };
        self.bump();
        let text = if *self.peek() == Tok::Sym("/") {
            self.bump();
            let Tok::Num(den) = self.peek().clone() else {
                return self.unexpected("a denominator");
            };
            self.bump();
            alloc::format!("{}/{}", first, den)
        } else {
            first
        };
        parse_rational(&text).map_err(|e| ParseError { pos, kind: ParseErrorKind::BadNumber(e) })
    }
}

/// Parses surface syntax.
pub fn parse(text: &str) -> Result<SurfaceFormula, ParseError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let f = p.phi()?;
    if *p.peek() != Tok::End {
        return p.unexpected("`&`, `|` or end of input");
    }
    Ok(f)
}

fn norm(f: &SurfaceFormula, negated: bool) -> Result<StateFormula, NormalizeError> {
    Ok(match f {
        SurfaceFormula::Atom { name, .. } => {
            if negated {
                StateFormula::NegAtom(name.clone())
            } else {
                StateFormula::Atom(name.clone())
            }
        }
        SurfaceFormula::Not { inner, .. } => norm(inner, !negated)?,
        SurfaceFormula::And(xs) | SurfaceFormula::Or(xs) => {
            let parts = xs.iter().map(|x| norm(x, negated)).collect::<Result<Vec<_>, _>>()?;
            let conj = matches!(f, SurfaceFormula::And(_)) != negated;
            if conj {
                StateFormula::and(parts)
            } else {
                StateFormula::or(parts)
            }
        }
        SurfaceFormula::Prob { op, cmp, bound, body, pos } => {
            let written = if *cmp == SurfaceCmp::Eq { SurfaceCmp::Ge } else { *cmp };
            let effective = if negated { written.negate() } else { written };
            // P(Fφ) <= r  iff  P(G¬φ) >= 1-r,  P(Fφ) < r  iff  P(G¬φ) > 1-r, and dually for G.
            let (core_op, core_cmp, core_bound, body_negated) = match effective {
                SurfaceCmp::Ge | SurfaceCmp::Eq => (*op, Cmp::Ge, bound.clone(), false),
                SurfaceCmp::Gt => (*op, Cmp::Gt, bound.clone(), false),
                SurfaceCmp::Le => (dual(*op), Cmp::Ge, Rational::one() - bound, true),
                SurfaceCmp::Lt => (dual(*op), Cmp::Gt, Rational::one() - bound, true),
            };
            let core_body = norm(body, body_negated)?;
            StateFormula::prob(core_op, core_cmp, core_bound, core_body).map_err(|t| {
                NormalizeError::TrivialBound {
                    pos: *pos,
                    op: *op,
                    cmp: effective.symbol(),
                    bound: bound.clone(),
                    core: alloc::format!("{}{}{}", core_op, t.cmp, t.bound),
                }
            })?
        }
    })
}

fn dual(op: PathOp) -> PathOp {
    match op {
        PathOp::F => PathOp::G,
        PathOp::G => PathOp::F,
    }
}

/// Pushes negations to atoms, rewrites `<=`/`<` through the `F`/`G`
/// duality and `=1` to `>=1`, and flattens boolean connectives.
pub fn normalize(f: &SurfaceFormula) -> Result<StateFormula, NormalizeError> {
    norm(f, false)
}

/// [`parse`] followed by [`normalize`].
pub fn parse_formula(text: &str) -> Result<StateFormula, FormulaError> {
    Ok(normalize(&parse(text)?)?)
}
