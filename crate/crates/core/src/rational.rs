//! Exact rational numbers and their text encodings.
//!
//! Every value, weight and fractional edge variable in the crate is a
//! [`Rational`]. Text encodings accept integers (`"3"`), decimals
//! (`"0.25"`, `"-1.5"`) and fractions (`"7/4"`); output is always the
//! lowest-terms fraction form (`"7/4"`, `"3"`).

use num::{BigInt, BigRational, One, Signed, Zero};
use std::str::FromStr;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{input}` is not an exact decimal or p/q fraction")]
pub struct ParseRationalError {
    pub input: String,
}

/// Shorthand constructor used throughout the crate and its tests.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError {
        input: input.to_string(),
    };
    let s = input.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_integer(p.trim()).ok_or_else(err)?;
        let q = parse_integer(q.trim()).ok_or_else(err)?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(p, q));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    let all_digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(whole) || !all_digits(frac) {
        return Err(err());
    }
    let digits = format!("{whole}{frac}");
    let numer = BigInt::from_str(&digits).map_err(|_| err())?;
    let denom = num::pow(BigInt::from(10), frac.len());
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let body = s
        .strip_prefix('-')
        .or_else(|| s.strip_prefix('+'))
        .unwrap_or(s);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s.strip_prefix('+').unwrap_or(s)).ok()
}

pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// `true` when `value` lies strictly between two consecutive integers.
pub fn is_fractional(value: &Rational) -> bool {
    !value.is_integer()
}

/// Distance from `value` up to the next integer (zero when integral).
pub fn ceil_slack(value: &Rational) -> Rational {
    value.ceil() - value
}

/// Distance from `value` down to the previous integer (zero when integral).
pub fn floor_slack(value: &Rational) -> Rational {
    value - value.floor()
}

/// Approximate conversion used only for reports and statistics.
pub fn to_f64(value: &Rational) -> f64 {
    use num::ToPrimitive;
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn abs(value: &Rational) -> Rational {
    value.abs()
}

pub fn is_unit_interval_interior(value: &Rational) -> bool {
    value.is_positive() && value < &Rational::one()
}

/// Serde adapter storing a [`Rational`] as its canonical string.
pub mod serde_string {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let raw = RawNumber::deserialize(d)?;
        raw.into_rational().map_err(de::Error::custom)
    }

    /// Accepts a JSON string or a JSON integer; binary floats are refused.
    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum RawNumber {
        Text(String),
        Int(i64),
        Float(f64),
    }

    impl RawNumber {
        pub(crate) fn into_rational(self) -> Result<Rational, String> {
            match self {
                RawNumber::Text(t) => parse_rational(&t).map_err(|e| e.to_string()),
                RawNumber::Int(i) => Ok(super::int(i)),
                RawNumber::Float(f) => Err(format!(
                    "binary float {f} is not exact; encode it as a decimal string or p/q"
                )),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(parse_rational("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), ratio(-3, 2));
        assert_eq!(parse_rational("6/8").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational("100").unwrap(), int(100));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("0.1").unwrap(), ratio(1, 10));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "abc", "1/0", "1.2.3", "1e5", "--1", "/3", "."] {
            assert!(parse_rational(bad).is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn formats_lowest_terms() {
        assert_eq!(format_rational(&ratio(6, 8)), "3/4");
        assert_eq!(format_rational(&ratio(-4, 2)), "-2");
        assert_eq!(format_rational(&int(0)), "0");
    }

    #[test]
    fn slacks() {
        let x = ratio(7, 4);
        assert_eq!(ceil_slack(&x), ratio(1, 4));
        assert_eq!(floor_slack(&x), ratio(3, 4));
        assert_eq!(ceil_slack(&int(2)), int(0));
    }
}
