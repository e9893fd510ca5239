//! Exact rationals and the extended reals `ℚ ∪ {+∞}` used for costs and values.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiteralError {
    #[error("empty numeric literal")]
    Empty,
    #[error("malformed rational literal {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("negative denominator in {0:?}")]
    NegativeDenominator(String),
    #[error("-inf is not a valid cost")]
    NegativeInfinity,
}

fn parse_digits(s: &str, whole: &str) -> Result<BigInt, LiteralError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(LiteralError::Malformed(whole.to_string()));
    }
    BigInt::from_str(s).map_err(|_| LiteralError::Malformed(whole.to_string()))
}

/// Parses `"p/q"`, `"-p/q"` or an integer literal into a reduced rational.
///
/// The sign may only appear on the numerator; `"1/-2"` is rejected.
pub fn parse_rational(text: &str) -> Result<Rational, LiteralError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(LiteralError::Empty);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => {
            if d.starts_with('-') {
                return Err(LiteralError::NegativeDenominator(s.to_string()));
            }
            (parse_digits(n, s)?, parse_digits(d, s)?)
        }
        None => (parse_digits(body, s)?, BigInt::from(1)),
    };
    if den.is_zero() {
        return Err(LiteralError::ZeroDenominator(s.to_string()));
    }
    let num = if neg { -num } else { num };
    Ok(Rational::new(num, den))
}

/// Canonical text of a rational: `"p/q"` in lowest terms, or `"p"` when integral.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Always emits the `"p/q"` form, including `"0/1"` and `"3/1"`.
pub fn format_rational_fraction(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Decimal approximation for display only.
pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// A finite rational or `+∞`. There is no `-∞`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtendedValue {
    Finite(Rational),
    Infinite,
}

impl ExtendedValue {
    pub fn zero() -> Self {
        ExtendedValue::Finite(Rational::zero())
    }

    pub fn from_integer(v: i64) -> Self {
        ExtendedValue::Finite(Rational::from_integer(BigInt::from(v)))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedValue::Infinite)
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtendedValue::Finite(r) => Some(r),
            ExtendedValue::Infinite => None,
        }
    }

    /// Multiplies by a nonnegative weight with the convention `0 · ∞ = 0`.
    pub fn weighted(&self, weight: &Rational) -> ExtendedValue {
        debug_assert!(!weight.is_negative());
        match self {
            _ if weight.is_zero() => ExtendedValue::zero(),
            ExtendedValue::Finite(r) => ExtendedValue::Finite(r * weight),
            ExtendedValue::Infinite => ExtendedValue::Infinite,
        }
    }

    pub fn add_assign_ref(&mut self, other: &ExtendedValue) {
        match (&mut *self, other) {
            (ExtendedValue::Infinite, _) => {}
            (_, ExtendedValue::Infinite) => *self = ExtendedValue::Infinite,
            (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => *a += b,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtendedValue::Finite(r) => rational_to_f64(r),
            ExtendedValue::Infinite => f64::INFINITY,
        }
    }

    /// Document literal: `"inf"` or the canonical rational text.
    pub fn to_literal(&self) -> String {
        match self {
            ExtendedValue::Finite(r) => format_rational(r),
            ExtendedValue::Infinite => "inf".to_string(),
        }
    }
}

impl Default for ExtendedValue {
    fn default() -> Self {
        ExtendedValue::zero()
    }
}

impl From<Rational> for ExtendedValue {
    fn from(r: Rational) -> Self {
        ExtendedValue::Finite(r)
    }
}

impl FromStr for ExtendedValue {
    type Err = LiteralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "+inf" => Ok(ExtendedValue::Infinite),
            "-inf" => Err(LiteralError::NegativeInfinity),
            other => parse_rational(other).map(ExtendedValue::Finite),
        }
    }
}

impl Add for ExtendedValue {
    type Output = ExtendedValue;

    fn add(mut self, rhs: ExtendedValue) -> ExtendedValue {
        self.add_assign_ref(&rhs);
        self
    }
}

impl<'a> Add<&'a ExtendedValue> for &'a ExtendedValue {
    type Output = ExtendedValue;

    fn add(self, rhs: &'a ExtendedValue) -> ExtendedValue {
        let mut out = self.clone();
        out.add_assign_ref(rhs);
        out
    }
}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedValue::Infinite, ExtendedValue::Infinite) => Ordering::Equal,
            (ExtendedValue::Infinite, _) => Ordering::Greater,
            (_, ExtendedValue::Infinite) => Ordering::Less,
            (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(r) => write!(f, "{}", format_rational_fraction(r)),
            ExtendedValue::Infinite => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_fractions_exactly() {
        assert_eq!(parse_rational("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_rational("2/4").unwrap(), q(1, 2));
        assert_eq!(parse_rational("-7").unwrap(), q(-7, 1));
        assert_eq!(parse_rational(" 12 ").unwrap(), q(12, 1));
    }

    #[test]
    fn rejects_malformed_literals() {
        assert!(matches!(
            parse_rational("1/-2"),
            Err(LiteralError::NegativeDenominator(_))
        ));
        assert!(matches!(parse_rational("1/0"), Err(LiteralError::ZeroDenominator(_))));
        assert!(matches!(parse_rational("0.5"), Err(LiteralError::Malformed(_))));
        assert!(matches!(parse_rational("a/b"), Err(LiteralError::Malformed(_))));
        assert_eq!(parse_rational(""), Err(LiteralError::Empty));
        assert_eq!("-inf".parse::<ExtendedValue>(), Err(LiteralError::NegativeInfinity));
    }

    #[test]
    fn extended_arithmetic() {
        let inf = ExtendedValue::Infinite;
        let two = ExtendedValue::from_integer(2);
        assert_eq!(&two + &inf, inf);
        assert!(inf > two);
        assert_eq!(inf.weighted(&q(0, 1)), ExtendedValue::zero());
        assert_eq!(two.weighted(&q(1, 4)), ExtendedValue::Finite(q(1, 2)));
        assert_eq!("inf".parse::<ExtendedValue>().unwrap(), inf);
        assert_eq!(ExtendedValue::Infinite.to_literal(), "inf");
        assert_eq!(ExtendedValue::Finite(q(6, 4)).to_literal(), "3/2");
    }
}
