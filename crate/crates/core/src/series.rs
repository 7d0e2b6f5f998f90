//! Truncated power series in one variable and sparse bivariate polynomials.
//!
//! Every univariate result carries the smallest order of its operands; nothing
//! silently extends precision. The finite difference `nabla` consumes one order.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("division by a series with zero constant term")]
    DivisionByNonUnit,
    #[error("composition with g(0) != 0 needs f to be a polynomial below its order")]
    CompositionUndefined,
    #[error("truncation order exhausted")]
    OrderExhausted,
    #[error("lambda must be positive")]
    NonpositiveLambda,
}

/// `a_0 + a_1 s + ... + a_K s^K + O(s^{K+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> TruncatedSeries<T> {
    /// Order is `coeffs.len() - 1`; an empty vector gives the zero series of order 0.
    pub fn new(mut coeffs: Vec<T>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(T::zero());
        }
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![T::zero(); order + 1] }
    }

    pub fn constant(c: T, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// `c s^m` at the given order (zero if `m > order`).
    pub fn monomial(m: usize, c: T, order: usize) -> Self {
        let mut s = Self::zero(order);
        if m <= order {
            s.coeffs[m] = c;
        }
        s
    }

    /// Embeds polynomial coefficients at `order`, padding with zeros or truncating.
    pub fn from_poly(coeffs: &[T], order: usize) -> Self {
        let mut s = Self::zero(order);
        for (j, c) in coeffs.iter().enumerate().take(order + 1) {
            s.coeffs[j] = c.clone();
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn coeff(&self, j: usize) -> T {
        self.coeffs.get(j).cloned().unwrap_or_else(T::zero)
    }

    /// Index of the highest nonzero coefficient.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    /// Index of the lowest nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::from_poly(&self.coeffs[..=order.min(self.order())], order.min(self.order()))
    }

    fn common_order(&self, other: &Self) -> usize {
        self.order().min(other.order())
    }

    pub fn add(&self, other: &Self) -> Self {
        let k = self.common_order(other);
        Self::new((0..=k).map(|j| self.coeffs[j].clone() + other.coeffs[j].clone()).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let k = self.common_order(other);
        Self::new((0..=k).map(|j| self.coeffs[j].clone() - other.coeffs[j].clone()).collect())
    }

    pub fn neg(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }

    pub fn scale(&self, c: &T) -> Self {
        Self::new(self.coeffs.iter().map(|a| a.clone() * c.clone()).collect())
    }

    /// Cauchy product truncated to the common order.
    pub fn mul(&self, other: &Self) -> Self {
        let k = self.common_order(other);
        let mut out = vec![T::zero(); k + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(k + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(k + 1 - i) {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Self::new(out)
    }

    /// `1/g` by the recursive coefficient solve.
    pub fn reciprocal(&self) -> Result<Self, SeriesError> {
        let g0 = self.coeffs[0].clone();
        if g0.is_zero() {
            return Err(SeriesError::DivisionByNonUnit);
        }
        let k = self.order();
        let mut out: Vec<T> = Vec::with_capacity(k + 1);
        out.push(T::one() / g0.clone());
        for n in 1..=k {
            let mut acc = T::zero();
            for j in 1..=n {
                acc = acc + self.coeffs[j].clone() * out[n - j].clone();
            }
            out.push(-acc / g0.clone());
        }
        Ok(Self::new(out))
    }

    /// `f / g` via a forward solve of `g q = f`.
    pub fn div(&self, g: &Self) -> Result<Self, SeriesError> {
        let g0 = g.coeffs[0].clone();
        if g0.is_zero() {
            return Err(SeriesError::DivisionByNonUnit);
        }
        let k = self.common_order(g);
        let mut q: Vec<T> = Vec::with_capacity(k + 1);
        for n in 0..=k {
            let mut acc = self.coeffs[n].clone();
            for j in 1..=n {
                acc = acc - g.coeffs[j].clone() * q[n - j].clone();
            }
            q.push(acc / g0.clone());
        }
        Ok(Self::new(q))
    }

    /// `f(g(s))`. With `g(0) = 0` this is the usual truncated substitution.
    /// With `g(0) != 0` the result is only meaningful when `f` is an exact
    /// polynomial, witnessed by a vacant top slot (`degree < order`).
    pub fn compose(&self, g: &Self) -> Result<Self, SeriesError> {
        let k = self.common_order(g);
        if !g.coeffs[0].is_zero() {
            if let Some(d) = self.degree() {
                if d >= self.order() {
                    return Err(SeriesError::CompositionUndefined);
                }
            }
            // Full polynomial evaluation by Horner at the order of g.
            let gk = g.truncate(k);
            let mut acc = Self::zero(k);
            let deg = self.degree().unwrap_or(0);
            for j in (0..=deg).rev() {
                acc = acc.mul(&gk);
                acc.coeffs[0] = acc.coeffs[0].clone() + self.coeffs[j].clone();
            }
            return Ok(acc);
        }
        let gk = g.truncate(k);
        let mut acc = Self::zero(k);
        for j in (0..=k).rev() {
            acc = acc.mul(&gk);
            acc.coeffs[0] = acc.coeffs[0].clone() + self.coeffs[j].clone();
        }
        Ok(acc)
    }

    /// Taylor shift `f(s + theta)` of an exact polynomial; keeps the order.
    pub fn shift(&self, theta: &T) -> Self {
        let deg = match self.degree() {
            Some(d) => d,
            None => return self.clone(),
        };
        // Synthetic division, repeated.
        let mut c: Vec<T> = self.coeffs[..=deg].to_vec();
        for i in 0..deg {
            for j in (i..deg).rev() {
                c[j] = c[j].clone() + theta.clone() * c[j + 1].clone();
            }
        }
        Self::from_poly(&c, self.order().max(deg))
    }

    /// `(f(s) - f(0)) / s`; the order drops by one.
    pub fn nabla(&self) -> Result<Self, SeriesError> {
        if self.order() == 0 {
            return Err(SeriesError::OrderExhausted);
        }
        Ok(Self::new(self.coeffs[1..].to_vec()))
    }

    /// `(1/lambda) s d/ds`.
    pub fn theta(&self, lambda: &T) -> Result<Self, SeriesError> {
        if *lambda <= T::zero() {
            return Err(SeriesError::NonpositiveLambda);
        }
        Ok(Self::new(
            self.coeffs.iter().enumerate().map(|(j, a)| a.clone() * T::from_int(j as i64) / lambda.clone()).collect(),
        ))
    }

    /// `s^m f`, same order.
    pub fn shift_up(&self, m: usize) -> Self {
        let k = self.order();
        let mut out = vec![T::zero(); k + 1];
        for j in 0..=k {
            if j + m <= k {
                out[j + m] = self.coeffs[j].clone();
            }
        }
        Self::new(out)
    }

    /// `s^m f` raised to order `K + m`, keeping every known coefficient.
    pub fn mul_s_pow(&self, m: usize) -> Self {
        let mut out = vec![T::zero(); m];
        out.extend(self.coeffs.iter().cloned());
        Self::new(out)
    }

    pub fn derivative(&self) -> Result<Self, SeriesError> {
        if self.order() == 0 {
            return Err(SeriesError::OrderExhausted);
        }
        Ok(Self::new((1..=self.order()).map(|j| self.coeffs[j].clone() * T::from_int(j as i64)).collect()))
    }

    /// `sum |a_j|` over the stored coefficients.
    pub fn norm_ell1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.to_f64_lossy().abs()).sum()
    }

    /// Horner evaluation of the stored polynomial part.
    pub fn eval(&self, s: &T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, c| acc * s.clone() + c.clone())
    }

    pub fn eval_f64(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c.to_f64_lossy())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> TruncatedSeries<U> {
        TruncatedSeries::new(self.coeffs.iter().map(f).collect())
    }

    pub fn to_f64(&self) -> TruncatedSeries<f64> {
        self.map(|c| c.to_f64_lossy())
    }
}

impl<T: Scalar> Add for &TruncatedSeries<T> {
    type Output = TruncatedSeries<T>;
    fn add(self, rhs: Self) -> TruncatedSeries<T> {
        TruncatedSeries::add(self, rhs)
    }
}

impl<T: Scalar> Sub for &TruncatedSeries<T> {
    type Output = TruncatedSeries<T>;
    fn sub(self, rhs: Self) -> TruncatedSeries<T> {
        TruncatedSeries::sub(self, rhs)
    }
}

impl<T: Scalar> Mul for &TruncatedSeries<T> {
    type Output = TruncatedSeries<T>;
    fn mul(self, rhs: Self) -> TruncatedSeries<T> {
        TruncatedSeries::mul(self, rhs)
    }
}

impl<T: Scalar> Neg for &TruncatedSeries<T> {
    type Output = TruncatedSeries<T>;
    fn neg(self) -> TruncatedSeries<T> {
        TruncatedSeries::neg(self)
    }
}

/// Coefficient string used by the JSON formats: `"p/q"` for rationals,
/// a decimal literal for floats.
pub fn coeff_to_string<T: Scalar>(c: &T) -> String {
    if T::EXACT {
        return c.to_string();
    }
    let x = c.to_f64_lossy();
    if x != 0.0 && (x.abs() < 1e-5 || x.abs() >= 1e16) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// `serialize_with` helper writing a single coefficient string.
pub fn serialize_coeff<T: Scalar, S: Serializer>(c: &T, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&coeff_to_string(c))
}

impl<T: Scalar> Serialize for TruncatedSeries<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.coeffs.len()))?;
        for c in &self.coeffs {
            seq.serialize_element(&coeff_to_string(c))?;
        }
        seq.end()
    }
}

/// A JSON coefficient: either a string (`"p/q"`, decimal) or a bare number.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffLiteral {
    Text(String),
    Int(i64),
    Float(f64),
}

impl CoeffLiteral {
    pub fn parse<T: Scalar>(&self) -> Result<T, crate::scalar::ParseScalarError> {
        match self {
            CoeffLiteral::Text(s) => T::parse_coeff(s),
            CoeffLiteral::Int(n) => Ok(T::from_int(*n)),
            CoeffLiteral::Float(x) => T::parse_coeff(&format!("{x:e}")),
        }
    }
}

impl<'de, T: Scalar> Deserialize<'de> for TruncatedSeries<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SeqVisitor<T>(std::marker::PhantomData<T>);
        impl<'de, T: Scalar> Visitor<'de> for SeqVisitor<T> {
            type Value = TruncatedSeries<T>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of coefficient strings")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(lit) = seq.next_element::<CoeffLiteral>()? {
                    out.push(lit.parse::<T>().map_err(de::Error::custom)?);
                }
                if out.is_empty() {
                    return Err(de::Error::custom("empty coefficient list"));
                }
                Ok(TruncatedSeries::new(out))
            }
        }
        deserializer.deserialize_seq(SeqVisitor(std::marker::PhantomData))
    }
}

/// Sparse `sum q_ij s^i e^j` with no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePoly<T> {
    terms: BTreeMap<(u32, u32), T>,
}

impl<T: Scalar> Default for BivariatePoly<T> {
    fn default() -> Self {
        Self { terms: BTreeMap::new() }
    }
}

impl<T: Scalar> BivariatePoly<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = ((u32, u32), T)>) -> Self {
        let mut p = Self::new();
        for ((i, j), c) in terms {
            p.add_term(i, j, c);
        }
        p
    }

    pub fn add_term(&mut self, i: u32, j: u32, c: T) {
        let entry = self.terms.entry((i, j)).or_insert_with(T::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.remove(&(i, j));
        }
    }

    pub fn get(&self, i: u32, j: u32) -> T {
        self.terms.get(&(i, j)).cloned().unwrap_or_else(T::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &T)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(i, j), c) in &other.terms {
            out.add_term(i, j, c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::new();
        for (&(i1, j1), a) in &self.terms {
            for (&(i2, j2), b) in &other.terms {
                out.add_term(i1 + i2, j1 + j2, a.clone() * b.clone());
            }
        }
        out
    }

    pub fn scale(&self, c: &T) -> Self {
        Self::from_terms(self.terms.iter().map(|(&k, a)| (k, a.clone() * c.clone())))
    }

    /// Drops terms negligible against the largest coefficient (floating fields).
    pub fn cleaned(&self, rel: f64) -> Self {
        let scale = self.terms.values().map(|c| c.to_f64_lossy().abs()).fold(0.0, f64::max);
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| T::EXACT || c.to_f64_lossy().abs() > rel * scale)
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
        }
    }

    /// Removes every term whose `e`-degree exceeds `max_j`.
    pub fn truncate_e(&self, max_j: u32) -> Self {
        Self { terms: self.terms.iter().filter(|((_, j), _)| *j <= max_j).map(|(k, c)| (*k, c.clone())).collect() }
    }

    pub fn degree_s(&self) -> u32 {
        self.terms.keys().map(|k| k.0).max().unwrap_or(0)
    }

    pub fn eval(&self, s: &T, e: &T) -> T {
        self.terms.iter().fold(T::zero(), |acc, (&(i, j), c)| acc + c.clone() * s.powi(i) * e.powi(j))
    }

    pub fn eval_f64(&self, s: f64, e: f64) -> f64 {
        self.terms.iter().map(|(&(i, j), c)| c.to_f64_lossy() * s.powi(i as i32) * e.powi(j as i32)).sum()
    }

    /// `Q(s; e = value)` as a series in `s` at the given order.
    pub fn restrict_e(&self, e: &T, order: usize) -> TruncatedSeries<T> {
        let mut coeffs = vec![T::zero(); order + 1];
        for (&(i, j), c) in &self.terms {
            if (i as usize) <= order {
                coeffs[i as usize] = coeffs[i as usize].clone() + c.clone() * e.powi(j);
            }
        }
        TruncatedSeries::new(coeffs)
    }

    /// Coefficients of `Q(0, e)` indexed by the power of `e`.
    pub fn at_s_zero(&self) -> BTreeMap<u32, T> {
        self.terms.iter().filter(|((i, _), _)| *i == 0).map(|(&(_, j), c)| (j, c.clone())).collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> BivariatePoly<U> {
        BivariatePoly::from_terms(self.terms.iter().map(|(&k, c)| (k, f(c))))
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    s: u32,
    e: u32,
    c: String,
}

impl<T: Scalar> Serialize for BivariatePoly<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.terms.len()))?;
        for (&(i, j), c) in &self.terms {
            seq.serialize_element(&TermJson { s: i, e: j, c: coeff_to_string(c) })?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};
    use num_traits::Zero;

    fn q(v: &[i64]) -> TruncatedSeries<Rational> {
        TruncatedSeries::new(v.iter().map(|&x| rat(x, 1)).collect())
    }

    #[test]
    fn add_cancels_and_respects_min_order() {
        assert_eq!(q(&[1, 1]).add(&q(&[1, -1])), q(&[2, 0]));
        assert_eq!(q(&[1, 2, 3]).add(&TruncatedSeries::zero(2)), q(&[1, 2, 3]));
        assert_eq!(q(&[1, 2, 3]).add(&q(&[1, 1])), q(&[2, 3]));
    }

    #[test]
    fn mul_div_compose_examples() {
        let p = q(&[1, 1, 0]).mul(&q(&[1, -1, 0]));
        assert_eq!(p, q(&[1, 0, -1]));
        let geo = q(&[1, 0, 0, 0]).div(&q(&[1, -1, 0, 0])).unwrap();
        assert_eq!(geo, q(&[1, 1, 1, 1]));
        let f = q(&[1, -1, 0, 0, 0]).reciprocal().unwrap();
        let c = f.compose(&q(&[0, 0, 1, 0, 0])).unwrap();
        assert_eq!(c, q(&[1, 0, 1, 0, 1]));
    }

    #[test]
    fn division_by_non_unit_fails() {
        assert_eq!(q(&[1, 0]).div(&q(&[0, 1])), Err(SeriesError::DivisionByNonUnit));
        assert_eq!(q(&[0, 1]).reciprocal(), Err(SeriesError::DivisionByNonUnit));
    }

    #[test]
    fn composition_with_nonzero_constant() {
        // f has a nonzero top coefficient: it may be a truncated series.
        assert_eq!(q(&[1, 1]).compose(&q(&[1, 1])), Err(SeriesError::CompositionUndefined));
        // (1 + x) at x = 2 + s, as a polynomial with headroom.
        assert_eq!(q(&[1, 1, 0]).compose(&q(&[2, 1, 0])).unwrap(), q(&[3, 1, 0]));
    }

    #[test]
    fn shift_matches_binomial_expansion() {
        // (x^2)(s + 3) = s^2 + 6 s + 9
        assert_eq!(q(&[0, 0, 1]).shift(&rat(3, 1)), q(&[9, 6, 1]));
    }

    #[test]
    fn nabla_examples() {
        let c = q(&[5, 0, 0]);
        assert!(c.nabla().unwrap().is_zero());
        assert_eq!(q(&[7]).nabla(), Err(SeriesError::OrderExhausted));
        let geo = q(&[1, 1, 1, 1, 1]);
        assert_eq!(geo.nabla().unwrap(), q(&[1, 1, 1, 1]));
        // s^2 g  ->  s g
        let g = q(&[2, 3, 0, 0, 0]);
        let sg = g.shift_up(2);
        assert_eq!(sg.nabla().unwrap(), g.shift_up(1).truncate(3));
    }

    #[test]
    fn theta_examples() {
        assert!(q(&[4, 0]).theta(&rat(1, 1)).unwrap().is_zero());
        assert_eq!(q(&[0, 0, 0, 1]).theta(&rat(1, 1)).unwrap(), q(&[0, 0, 0, 3]));
        let t = q(&[0, 1, 1]).theta(&rat(2, 1)).unwrap();
        assert_eq!(t.coeffs(), &[rat(0, 1), rat(1, 2), rat(1, 1)]);
        assert_eq!(q(&[1]).theta(&rat(0, 1)), Err(SeriesError::NonpositiveLambda));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(TruncatedSeries::<f64>::zero(3).norm_ell1(), 0.0);
        assert_eq!(q(&[1, -2, 3]).norm_ell1(), 6.0);
        let geo = TruncatedSeries::<Rational>::constant(rat(1, 1), 10)
            .div(&TruncatedSeries::new(
                std::iter::once(rat(1, 1))
                    .chain(std::iter::once(rat(-1, 2)))
                    .chain(std::iter::repeat_n(rat(0, 1), 9))
                    .collect(),
            ))
            .unwrap();
        let direct: f64 = (0..=10).map(|j| 0.5f64.powi(j)).sum();
        assert!((geo.norm_ell1() - direct).abs() < 1e-15);
        assert!((direct - (2.0 - 2f64.powi(-10))).abs() < 1e-15);
    }

    #[test]
    fn bipoly_examples() {
        // s^2 - 2 s e + e^2 + e^4
        let p = BivariatePoly::from_terms(vec![
            ((2, 0), rat(1, 1)),
            ((1, 1), rat(-2, 1)),
            ((0, 2), rat(1, 1)),
            ((0, 4), rat(1, 1)),
        ]);
        assert_eq!(p.eval(&rat(1, 1), &rat(1, 1)), rat(1, 1));
        assert_eq!(p.restrict_e(&Rational::zero(), 4), q(&[0, 0, 1, 0, 0]));
        let s = BivariatePoly::from_terms(vec![((1, 0), rat(1, 1))]);
        assert_eq!(s.eval(&rat(3, 1), &rat(17, 5)), rat(3, 1));
        assert_eq!(p.at_s_zero().len(), 2);
    }

    #[test]
    fn bipoly_drops_zero_terms() {
        let mut p = BivariatePoly::<Rational>::new();
        p.add_term(1, 1, rat(2, 1));
        p.add_term(1, 1, rat(-2, 1));
        assert!(p.is_empty());
    }

    #[test]
    fn series_json_round_trip() {
        let s = TruncatedSeries::new(vec![rat(1, 3), rat(-2, 1)]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"["1/3","-2"]"#);
        let back: TruncatedSeries<Rational> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let f: TruncatedSeries<f64> = serde_json::from_str(r#"["0.5", 2, "1/4"]"#).unwrap();
        assert_eq!(f.coeffs(), &[0.5, 2.0, 0.25]);
    }
}
