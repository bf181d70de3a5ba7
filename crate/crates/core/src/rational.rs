//! Exact rational helpers: the `p/q` text form and decimal rendering.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Rational type used throughout the crate.
pub type Rational = BigRational;

/// Default number of fractional digits in decimal renderings.
pub const DEFAULT_PRECISION: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RationalFormatError {
    #[error("empty rational")]
    Empty,
    #[error("decimal value {0:?} is not accepted; write it as a fraction such as \"1/2\"")]
    DecimalNotAllowed(String),
    #[error("malformed rational {0:?}; expected \"p/q\" or \"p\" with decimal integers")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

fn parse_int(digits: &str, whole: &str) -> Result<BigInt, RationalFormatError> {
    let body = digits.strip_prefix('-').unwrap_or(digits);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return Err(RationalFormatError::Malformed(whole.to_string()));
    }
    digits
        .parse::<BigInt>()
        .map_err(|_| RationalFormatError::Malformed(whole.to_string()))
}

/// Parses `"p/q"` or `"p"`. Decimal points are rejected outright so that
/// exactness is never lost on the way in.
pub fn parse_rational(text: &str) -> Result<Rational, RationalFormatError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RationalFormatError::Empty);
    }
    if s.contains('.') || s.contains('e') || s.contains('E') {
        return Err(RationalFormatError::DecimalNotAllowed(s.to_string()));
    }
    match s.split_once('/') {
        Some((p, q)) => {
            let num = parse_int(p.trim(), s)?;
            let den = parse_int(q.trim(), s)?;
            if den.is_zero() {
                return Err(RationalFormatError::ZeroDenominator(s.to_string()));
            }
            if den.is_negative() {
                return Err(RationalFormatError::Malformed(s.to_string()));
            }
            Ok(Rational::new(num, den))
        }
        None => Ok(Rational::from_integer(parse_int(s, s)?)),
    }
}

/// Canonical text form: reduced `p/q`, or `p` when the denominator is one.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Renders `value` with exactly `precision` fractional digits, rounding
/// half to even.
pub fn to_decimal(value: &Rational, precision: usize) -> String {
    let scale = BigInt::from(10u32).pow(precision as u32);
    let scaled = value.abs() * Rational::from_integer(scale.clone());
    let (mut q, r) = scaled.numer().div_rem(scaled.denom());
    let twice = &r * 2u32;
    let den = scaled.denom();
    if twice > *den || (twice == *den && q.is_odd()) {
        q += 1u32;
    }
    let (int_part, frac_part) = q.div_rem(&scale);
    let negative = value.is_negative() && !q.is_zero();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if precision > 0 {
        out.push('.');
        out.push_str(&format!("{:0>width$}", frac_part.to_string(), width = precision));
    }
    out
}

/// `floor(value * 2^64)` for `value` in `[0, 1]`, as a `u128` so that 1 maps
/// to `2^64` without overflow.
pub fn fixed_point_64(value: &Rational) -> u128 {
    let scaled = value * Rational::from_integer(BigInt::one() << 64);
    let floor = scaled.floor().to_integer();
    match floor.sign() {
        Sign::Minus => 0,
        _ => floor.to_u128().unwrap_or(u128::MAX),
    }
}
