//! Exact rational numbers and the literal formats accepted for them.

use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Arbitrary-precision fraction. The only numeric type used in semantic code.
pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RationalError {
    #[error("empty numeric literal")]
    Empty,
    #[error("malformed numeric literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn parse_digits(s: &str, whole: &str) -> Result<BigInt, RationalError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(RationalError::Malformed(whole.into()));
    }
    BigInt::from_str(s).map_err(|_| RationalError::Malformed(whole.into()))
}

/// Parses `p/q`, a plain integer, or a decimal such as `0.25` or `.5`.
/// Decimals are converted exactly; exponent notation is not accepted.
pub fn parse_rational(text: &str) -> Result<Rational, RationalError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(RationalError::Empty);
    }
    let (negative, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest.trim_start()),
        None => (false, t),
    };
    let value = if let Some((num, den)) = body.split_once('/') {
        let n = parse_digits(num.trim(), t)?;
        let d = parse_digits(den.trim(), t)?;
        if d.is_zero() {
            return Err(RationalError::ZeroDenominator(t.into()));
        }
        Rational::new(n, d)
    } else if let Some((whole, frac)) = body.split_once('.') {
        if whole.is_empty() && frac.is_empty() {
            return Err(RationalError::Malformed(t.into()));
        }
        let w = if whole.is_empty() { BigInt::zero() } else { parse_digits(whole, t)? };
        let f = if frac.is_empty() { BigInt::zero() } else { parse_digits(frac, t)? };
        let scale = num_traits::pow(BigInt::from(10u32), frac.len());
        Rational::new(w * &scale + f, scale)
    } else {
        Rational::from_integer(parse_digits(body, t)?)
    };
    Ok(if negative { -value } else { value })
}

/// Renders `p/q`, or just `p` for integers.
pub fn format_rational(r: &Rational) -> String {
    alloc::format!("{}", r)
}

/// Continued-fraction convergents of `x`, in order of increasing denominator.
/// The last convergent equals `x`.
pub fn convergents(x: &Rational) -> Vec<Rational> {
    let mut out = Vec::new();
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let mut num = x.numer().clone();
    let mut den = x.denom().clone();
    while !den.is_zero() {
        let (a, r) = num.div_mod_floor(&den);
        let h_next = &a * &h + &h_prev;
        let k_next = &a * &k + &k_prev;
        h_prev = core::mem::replace(&mut h, h_next);
        k_prev = core::mem::replace(&mut k, k_next);
        out.push(Rational::new(h.clone(), k.clone()));
        num = den;
        den = r;
    }
    out
}

/// Number of bits in numerator times denominator; used to pick small pivots.
pub(crate) fn height(r: &Rational) -> u64 {
    if r.is_zero() {
        return u64::MAX;
    }
    r.numer().bits() + r.denom().bits()
}

pub(crate) fn is_probability(r: &Rational) -> bool {
    !r.is_negative() && r <= &Rational::one()
}
