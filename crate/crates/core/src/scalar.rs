//! Coefficient fields shared by the series kernel and the recursion.
//!
//! Two fields are supported: exact rationals ([`Rational`]) for identities that
//! must hold bit-for-bit, and `f64` for everything that meets a quadrature.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot parse coefficient {0:?}")]
pub struct ParseScalarError(pub String);

/// A coefficient field usable by every series operation in the crate.
pub trait Scalar:
    Clone + Debug + Display + PartialEq + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `true` for exact fields.
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;

    /// Lossless for `f64`; for rationals the binary value of `x` is taken exactly.
    fn from_f64_exact(x: f64) -> Option<Self>;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact rational value (`None` for non-finite floats).
    fn to_rational(&self) -> Option<Rational>;

    /// Parses `"p/q"`, plain decimals and scientific notation.
    fn parse_coeff(s: &str) -> Result<Self, ParseScalarError>;

    /// Zero test used when cleaning sparse storage. Exact fields compare with
    /// zero; floating fields use a relative threshold against `scale`.
    fn negligible(&self, scale: f64) -> bool;

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer conversion")
    }

    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn from_f64_exact(x: f64) -> Option<Self> {
        Some(x)
    }

    fn to_rational(&self) -> Option<Rational> {
        Rational::from_float(*self)
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn parse_coeff(s: &str) -> Result<Self, ParseScalarError> {
        let t = s.trim();
        if let Some((p, q)) = t.split_once('/') {
            let p: f64 = p.trim().parse().map_err(|_| ParseScalarError(s.into()))?;
            let q: f64 = q.trim().parse().map_err(|_| ParseScalarError(s.into()))?;
            return Ok(p / q);
        }
        t.parse().map_err(|_| ParseScalarError(s.into()))
    }

    fn negligible(&self, scale: f64) -> bool {
        self.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn from_f64_exact(x: f64) -> Option<Self> {
        Rational::from_float(x)
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn to_f64_lossy(&self) -> f64 {
        rational_to_f64(self)
    }

    fn parse_coeff(s: &str) -> Result<Self, ParseScalarError> {
        parse_rational(s).ok_or_else(|| ParseScalarError(s.into()))
    }

    fn negligible(&self, _scale: f64) -> bool {
        self.is_zero()
    }
}

/// Correctly handles numerators/denominators far outside the `f64` range.
pub fn rational_to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Scale both parts down to 64 significant bits before dividing.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
    let exp = (shift_n - shift_d) as i32;
    (n / d) * 2f64.powi(exp.clamp(-1100, 1100))
}

/// Parses `"p/q"`, `"-12"`, `"0.125"`, `"1e-4"`, `"2.5E+3"` exactly.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((p, q)) = t.split_once('/') {
        let p = parse_rational(p)?;
        let q = parse_rational(q)?;
        if q.is_zero() {
            return None;
        }
        return Some(p / q);
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], i32::from_str(&t[i + 1..]).ok()?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str_radix(if all.is_empty() { "0" } else { &all }, 10).ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u8);
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    Some(value)
}

/// Decimal rendering of an `f64` turned into an exact rational, so that `0.1`
/// becomes `1/10` instead of its binary expansion.
pub fn rational_from_decimal_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    parse_rational(&format!("{x:e}"))
}

/// Best rational approximation with denominator at most `max_den`
/// (continued fractions). Returns `None` if the error exceeds `tol`.
pub fn rationalize(x: f64, max_den: u64, tol: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        let ai = BigInt::from_f64(a)?;
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        if k2 > BigInt::from(max_den) {
            break;
        }
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        let approx = Rational::new(h1.clone(), k1.clone());
        if (rational_to_f64(&approx) - x).abs() <= tol * x.abs().max(1e-300) {
            return Some(approx);
        }
        let frac = v - a;
        if frac.abs() < 1e-300 {
            break;
        }
        v = 1.0 / frac;
    }
    if k1.is_zero() {
        return None;
    }
    let approx = Rational::new(h1, k1);
    ((rational_to_f64(&approx) - x).abs() <= tol * x.abs().max(1e-300)).then_some(approx)
}

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/4"), Some(rat(3, 4)));
        assert_eq!(parse_rational("-0.125"), Some(rat(-1, 8)));
        assert_eq!(parse_rational("1e-4"), Some(rat(1, 10_000)));
        assert_eq!(parse_rational("2.5E+2"), Some(rat(250, 1)));
        assert_eq!(parse_rational(".5"), Some(rat(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn decimal_f64_maps_to_short_rational() {
        assert_eq!(rational_from_decimal_f64(0.1), Some(rat(1, 10)));
        assert_eq!(rational_from_decimal_f64(-3.0), Some(rat(-3, 1)));
    }

    #[test]
    fn huge_rationals_convert_to_f64() {
        let big = num_traits::pow(BigInt::from(10u8), 400);
        let r = Rational::new(big.clone() * BigInt::from(3), big);
        assert!((rational_to_f64(&r) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rationalize_recovers_simple_fractions() {
        assert_eq!(rationalize(0.75, 1000, 1e-14), Some(rat(3, 4)));
        assert_eq!(rationalize(-2.0 / 3.0, 1000, 1e-14), Some(rat(-2, 3)));
        assert_eq!(rationalize(std::f64::consts::PI, 1000, 1e-14), None);
    }
}
