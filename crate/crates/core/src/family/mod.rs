//! Polynomial families `P(x; eps)` unfolding `x^{mu+1}`, the Puiseux branch of
//! their biggest real root, the recentred polynomial `Q(s, e)` and the three
//! hypothesis checks on its Newton diagram.

mod newton;
mod puiseux;
pub mod roots;

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::{rat, rational_to_f64, Rational, Scalar};
use crate::series::{coeff_to_string, CoeffLiteral, SeriesError};

pub use newton::{check_h0, check_h2, check_h2_with, newton_diagram, H2Check, NewtonData, Verdict, VerdictKind};
pub use puiseux::{biggest_real_root_branch, compute_q, default_eps_grid, BranchMethod, PuiseuxBranch, Side};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FamilyError {
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("no real root near zero at eps = {eps:e}")]
    NoRealRoot { eps: f64 },
    #[error("two real branches coincide to the computed order")]
    BranchAmbiguous,
    #[error("no Puiseux branch reproduces the tracked root (max relative error {max_rel_err:e})")]
    BranchMismatch { max_rel_err: f64 },
    #[error("Q(s, e) is not divisible by s (constant term {residual:e})")]
    NotDivisible { residual: f64 },
    #[error("branch has no exact coefficients")]
    InexactBranch,
    #[error("Q(0, e) vanishes identically")]
    DegenerateQ,
    #[error("H2 verdict inconclusive at N = {n}: min {min:e} below margin {margin:e}")]
    Inconclusive { n: usize, min: f64, margin: f64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `sum c_km x^k eps^m` with `P(x; 0) = x^{mu+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFamily {
    mu: u32,
    coeffs: BTreeMap<(u32, u32), Rational>,
}

impl PolynomialFamily {
    pub fn new(mu: u32, terms: impl IntoIterator<Item = ((u32, u32), Rational)>) -> Result<Self, FamilyError> {
        if mu == 0 {
            return Err(FamilyError::InvalidFamily("mu must be at least 1".into()));
        }
        let mut coeffs: BTreeMap<(u32, u32), Rational> = BTreeMap::new();
        for (k, c) in terms {
            let e = coeffs.entry(k).or_insert_with(Rational::zero);
            *e += c;
        }
        coeffs.retain(|_, c| !c.is_zero());
        let unperturbed: Vec<_> = coeffs.iter().filter(|((_, m), _)| *m == 0).collect();
        if unperturbed.len() != 1 || *unperturbed[0].0 != (mu + 1, 0) || !unperturbed[0].1.is_one() {
            return Err(FamilyError::InvalidFamily(format!("P(x; 0) must equal x^{}", mu + 1)));
        }
        if coeffs.keys().any(|(k, _)| *k > mu + 1) {
            return Err(FamilyError::InvalidFamily(format!("degree in x must be {}", mu + 1)));
        }
        Ok(Self { mu, coeffs })
    }

    /// `x (x^mu - eps)`.
    pub fn equi(mu: u32) -> Self {
        Self::new(mu, [((mu + 1, 0), rat(1, 1)), ((1, 1), rat(-1, 1))]).expect("valid family")
    }

    /// `x ((x - eps)^2 + eps^4)`.
    pub fn counterexample() -> Self {
        Self::new(2, [((3, 0), rat(1, 1)), ((2, 1), rat(-2, 1)), ((1, 2), rat(1, 1)), ((1, 4), rat(1, 1))])
            .expect("valid family")
    }

    pub fn mu(&self) -> u32 {
        self.mu
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &Rational)> {
        self.coeffs.iter()
    }

    /// Coefficients in `x` at a fixed exact `eps`.
    pub fn at_eps(&self, eps: &Rational) -> Vec<Rational> {
        let mut p = vec![Rational::zero(); self.mu as usize + 2];
        for (&(k, m), c) in &self.coeffs {
            p[k as usize] += c * Scalar::powi(eps, m);
        }
        p
    }

    pub fn eval_f64(&self, x: f64, eps: f64) -> f64 {
        self.coeffs.iter().map(|(&(k, m), c)| rational_to_f64(c) * x.powi(k as i32) * eps.powi(m as i32)).sum()
    }

    /// `sum |c_km| |x|^k |eps|^m`, the natural size of `P` at a point.
    pub fn scale_f64(&self, x: f64, eps: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(&(k, m), c)| rational_to_f64(c).abs() * x.abs().powi(k as i32) * eps.abs().powi(m as i32))
            .sum()
    }

    /// Largest real root of `P(.; eps)` (exact Sturm counting).
    pub fn largest_real_root(&self, eps: &Rational) -> Option<f64> {
        roots::largest_real_root(&self.at_eps(eps))
    }

    /// Taylor coefficients of `x -> P(theta + x; eps)` computed exactly at the
    /// binary value of `theta`; the constant term is dropped, so the result is
    /// `Qo` with `P(theta + x) = x Qo(x)` whenever `theta` is a root.
    pub fn shifted_quotient(&self, eps: &Rational, theta: f64) -> Vec<f64> {
        let p = self.at_eps(eps);
        let t = Rational::from_float(theta).expect("finite root");
        let mut c = p.clone();
        let n = c.len() - 1;
        for i in 0..n {
            for j in (i..n).rev() {
                let add = &t * &c[j + 1];
                c[j] += add;
            }
        }
        c[1..].iter().map(rational_to_f64).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    x: u32,
    eps: u32,
    c: CoeffLiteral,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    mu: u32,
    terms: Vec<TermJson>,
}

impl Serialize for PolynomialFamily {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        FamilyJson {
            mu: self.mu,
            terms: self
                .coeffs
                .iter()
                .map(|(&(x, eps), c)| TermJson { x, eps, c: CoeffLiteral::Text(coeff_to_string(c)) })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PolynomialFamily {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = FamilyJson::deserialize(deserializer)?;
        let mut terms = Vec::with_capacity(raw.terms.len());
        for t in raw.terms {
            let c: Rational = t.c.parse().map_err(serde::de::Error::custom)?;
            terms.push(((t.x, t.eps), c));
        }
        PolynomialFamily::new(raw.mu, terms).map_err(serde::de::Error::custom)
    }
}

/// Exact `|eps|^{1/rho}` when `eps` is a perfect power, else the double value.
pub fn eps_hat_of(eps: &Rational, rho: u32) -> Rational {
    let a = eps.abs();
    if rho == 1 || a.is_zero() {
        return a;
    }
    let n = a.numer().nth_root(rho);
    let d = a.denom().nth_root(rho);
    if num_traits::pow(n.clone(), rho as usize) == *a.numer() && num_traits::pow(d.clone(), rho as usize) == *a.denom()
    {
        return Rational::new(n, d);
    }
    Rational::from_float(rational_to_f64(&a).powf(1.0 / rho as f64)).expect("finite")
}
