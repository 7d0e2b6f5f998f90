//! The finite-difference coefficient recursion at a fixed parameter point,
//! two-sided gluing in `eps`, and mode summation for Dulac times.

use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::family::{
    biggest_real_root_branch, compute_q, eps_hat_of, FamilyError, PolynomialFamily, PuiseuxBranch, Side,
};
use crate::scalar::{rational_to_f64, Rational, Scalar};
use crate::series::{BivariatePoly, SeriesError, TruncatedSeries};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExpansionError {
    #[error("invalid unfolding spec: {0}")]
    InvalidSpec(String),
    #[error("truncation order exhausted")]
    OrderExhausted,
    #[error("V_{j}(0) vanishes")]
    NonUnitV { j: usize },
    #[error("c_{j} jumps by {gap:e} across eps = 0")]
    ContinuityViolation { j: usize, gap: f64 },
    #[error("c_{j} = {value:e} at eps = {eps:e} should vanish")]
    VanishingViolation { j: usize, eps: f64, value: f64 },
    #[error("no decay certificate for the mode tail")]
    TailUnbounded,
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `P_eps(x) d/dx + (lambda V(x) y - U(x)) d/dy` at one parameter point.
///
/// `V` is stored normalized to `V(0) = 1`, with `lambda` absorbing `V(0)`;
/// the coefficients are invariant under that rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldingSpec {
    pub family: PolynomialFamily,
    pub branch: PuiseuxBranch,
    pub v: TruncatedSeries<Rational>,
    pub u: TruncatedSeries<Rational>,
    pub lambda: Rational,
    pub eps_hat: Rational,
}

impl UnfoldingSpec {
    pub fn new(
        family: PolynomialFamily,
        branch: PuiseuxBranch,
        v: TruncatedSeries<Rational>,
        u: TruncatedSeries<Rational>,
        lambda: Rational,
        eps_hat: Rational,
    ) -> Result<Self, ExpansionError> {
        let v0 = v.coeff(0);
        if !v0.is_positive() {
            return Err(ExpansionError::InvalidSpec("V(0) must be positive".into()));
        }
        if !lambda.is_positive() {
            return Err(ExpansionError::InvalidSpec("lambda must be positive".into()));
        }
        if eps_hat.is_negative() {
            return Err(ExpansionError::InvalidSpec("eps_hat must be non-negative".into()));
        }
        Ok(Self { family, branch, v: v.scale(&(Rational::one() / &v0)), u, lambda: lambda * v0, eps_hat })
    }

    /// Finds the branch for the sign of `eps` and sets `eps_hat = |eps|^{1/rho}`.
    pub fn build(
        family: PolynomialFamily,
        v: TruncatedSeries<Rational>,
        u: TruncatedSeries<Rational>,
        lambda: Rational,
        eps: &Rational,
    ) -> Result<Self, ExpansionError> {
        let side = if eps.is_negative() { Side::Minus } else { Side::Plus };
        let branch = biggest_real_root_branch(&family, side)?;
        let eps_hat = eps_hat_of(eps, branch.rho);
        Self::new(family, branch, v, u, lambda, eps_hat)
    }

    /// The same spec with another right-hand side `U`.
    pub fn with_u(&self, u: TruncatedSeries<Rational>) -> Self {
        Self { u, ..self.clone() }
    }

    /// The same spec at another `eps_hat`.
    pub fn with_eps_hat(&self, eps_hat: Rational) -> Self {
        Self { eps_hat, ..self.clone() }
    }

    pub fn eps_hat_f64(&self) -> f64 {
        rational_to_f64(&self.eps_hat)
    }

    pub fn eps(&self) -> f64 {
        self.branch.eps_of(self.eps_hat_f64())
    }

    /// `sign eps_hat^rho`, exactly.
    pub fn eps_exact(&self) -> Rational {
        let e = Scalar::powi(&self.eps_hat, self.branch.rho);
        if self.branch.sign == Side::Minus {
            -e
        } else {
            e
        }
    }

    pub fn lambda_f64(&self) -> f64 {
        rational_to_f64(&self.lambda)
    }

    pub fn theta_f64(&self) -> f64 {
        self.branch.theta(self.eps_hat_f64())
    }

    pub fn theta_exact(&self) -> Option<Rational> {
        self.branch.theta_exact(&self.eps_hat)
    }
}

/// `U(s + theta) / lambda`, `V(s + theta)` and `Q(s; eps_hat)` at one order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedData<T> {
    pub u: TruncatedSeries<T>,
    pub v: TruncatedSeries<T>,
    pub q: TruncatedSeries<T>,
    pub lambda: T,
}

fn embed_shift<T: Scalar>(p: &TruncatedSeries<Rational>, theta: &T, order: usize) -> TruncatedSeries<T> {
    let coeffs: Vec<T> = p.coeffs().iter().map(T::from_rational).collect();
    let room = order.max(coeffs.len());
    TruncatedSeries::from_poly(&coeffs, room).shift(theta).truncate(order)
}

pub(crate) fn theta_in<T: Scalar>(spec: &UnfoldingSpec) -> Result<T, ExpansionError> {
    if T::EXACT {
        let t = spec.theta_exact().ok_or(FamilyError::InexactBranch)?;
        Ok(T::from_rational(&t))
    } else {
        Ok(T::from_f64_exact(spec.theta_f64()).expect("finite"))
    }
}

fn q_poly<T: Scalar>(spec: &UnfoldingSpec) -> Result<BivariatePoly<T>, ExpansionError> {
    Ok(compute_q::<T>(&spec.family, &spec.branch)?)
}

pub fn shifted_data<T: Scalar>(spec: &UnfoldingSpec, order: usize) -> Result<ShiftedData<T>, ExpansionError> {
    let theta: T = theta_in(spec)?;
    let lambda = T::from_rational(&spec.lambda);
    let e = T::from_rational(&spec.eps_hat);
    let u = embed_shift(&spec.u, &theta, order).scale(&(T::one() / lambda.clone()));
    let v = embed_shift(&spec.v, &theta, order);
    let q = q_poly::<T>(spec)?.restrict_e(&e, order);
    Ok(ShiftedData { u, v, q, lambda })
}

/// Coefficients `c_0..c_ell` with the run's metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionResult<T: Scalar> {
    #[serde(serialize_with = "serialize_coeffs")]
    pub coeffs: Vec<T>,
    pub ell: usize,
    pub order: usize,
    pub eps: f64,
    pub eps_hat: f64,
    pub lambda: f64,
    pub branch: Side,
    pub validity_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
}

fn serialize_coeffs<T: Scalar, S: serde::Serializer>(c: &[T], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(c.len()))?;
    for x in c {
        seq.serialize_element(&crate::series::coeff_to_string(x))?;
    }
    seq.end()
}

impl<T: Scalar> ExpansionResult<T> {
    pub fn partial_sum(&self, s: f64) -> f64 {
        partial_sum(&self.coeffs, s)
    }

    pub fn to_f64(&self) -> ExpansionResult<f64> {
        ExpansionResult {
            coeffs: self.coeffs.iter().map(|c| c.to_f64_lossy()).collect(),
            ell: self.ell,
            order: self.order,
            eps: self.eps,
            eps_hat: self.eps_hat,
            lambda: self.lambda,
            branch: self.branch,
            validity_flag: self.validity_flag,
            tail_bound: self.tail_bound,
            modes: self.modes,
        }
    }
}

/// Output of the recursion: `c_0..c_ell` and `F_{ell+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recursion<T> {
    pub c: Vec<T>,
    pub f_next: TruncatedSeries<T>,
}

/// `F_0 = U`, `V_j = V - (j / lambda) Q`, `c_j = (F_j / V_j)(0)`,
/// `F_{j+1} = V_j nabla(F_j / V_j)`, for `j = 0..=ell`.
pub fn recursion<T: Scalar>(data: &ShiftedData<T>, ell: usize) -> Result<Recursion<T>, ExpansionError> {
    let mut f = data.u.clone();
    let mut c = Vec::with_capacity(ell + 1);
    for j in 0..=ell {
        let vj = data.v.sub(&data.q.scale(&(T::from_int(j as i64) / data.lambda.clone())));
        if vj.coeff(0).is_zero() {
            return Err(ExpansionError::NonUnitV { j });
        }
        let ratio = f.div(&vj)?;
        c.push(ratio.coeff(0));
        let next = ratio.nabla().map_err(|_| ExpansionError::OrderExhausted)?;
        f = vj.mul(&next);
    }
    Ok(Recursion { c, f_next: f })
}

/// Working order `ell + mu k + 4` for expansions differentiated `k` times.
pub fn working_order(ell: usize, mu: u32, k: usize) -> usize {
    ell + mu as usize * k + 4
}

pub fn coefficients<T: Scalar>(spec: &UnfoldingSpec, ell: usize) -> Result<ExpansionResult<T>, ExpansionError> {
    coefficients_with_order(spec, ell, working_order(ell, spec.family.mu(), 0))
}

pub fn coefficients_with_order<T: Scalar>(
    spec: &UnfoldingSpec,
    ell: usize,
    order: usize,
) -> Result<ExpansionResult<T>, ExpansionError> {
    if order < ell + 2 {
        return Err(ExpansionError::OrderExhausted);
    }
    let data = shifted_data::<T>(spec, order)?;
    let rec = recursion(&data, ell)?;
    let eps0 = vbounds(spec, ell, 0.1)?;
    Ok(ExpansionResult {
        coeffs: rec.c,
        ell,
        order,
        eps: spec.eps(),
        eps_hat: spec.eps_hat_f64(),
        lambda: spec.lambda_f64(),
        branch: spec.branch.sign,
        validity_flag: spec.eps().abs() <= eps0,
        tail_bound: None,
        modes: None,
    })
}

/// `Sigma_ell(s) = sum c_j s^j`; an empty list is `Sigma_{-1} = 0`.
pub fn partial_sum<T: Scalar>(c: &[T], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, x| acc * s + x.to_f64_lossy())
}

/// Largest coefficient of `Q theta(Sigma) - (V Sigma - U + s^{ell+1} F_{ell+1})`.
/// `ell = -1` checks the base case `Sigma_{-1} = 0`, `F_0 = U`.
pub fn residual_identity_check<T: Scalar>(spec: &UnfoldingSpec, ell: i64) -> Result<T, ExpansionError> {
    let order = working_order(ell.max(0) as usize, spec.family.mu(), 0);
    let data = shifted_data::<T>(spec, order)?;
    let (c, f_next) = if ell < 0 {
        (Vec::new(), data.u.clone())
    } else {
        let r = recursion(&data, ell as usize)?;
        (r.c, r.f_next)
    };
    let sigma = TruncatedSeries::from_poly(&c, order);
    let lhs = data.q.mul(&sigma.theta(&data.lambda)?);
    let shift = (ell + 1) as usize;
    let rhs = data.v.mul(&sigma).sub(&data.u).add(&f_next.mul_s_pow(shift).truncate(order));
    let diff = lhs.sub(&rhs);
    Ok(diff.coeffs().iter().fold(T::zero(), |m, x| if x.abs() > m { x.abs() } else { m }))
}

/// `c_1` from its closed form
/// `lim (1/s)(U/V - U(0)/V(0)) V / (V - Q/lambda)` via series division.
pub fn c1_closed_form<T: Scalar>(spec: &UnfoldingSpec) -> Result<T, ExpansionError> {
    let data = shifted_data::<T>(spec, 4)?;
    let ratio = data.u.div(&data.v)?;
    let v1 = data.v.sub(&data.q.scale(&(T::one() / data.lambda.clone())));
    let factor = data.v.div(&v1)?;
    Ok(ratio.nabla()?.mul(&factor).coeff(0))
}

/// Largest `eps_0` on the probe grid (`1e-8 ..= 1e-1`, same sign as the
/// spec) such that `1/2 <= V_j(s) <= 2` for `|s| <= s0`, `j <= ell`, and
/// every probe value up to it. Zero when even `eps = 0` fails.
pub fn vbounds(spec: &UnfoldingSpec, ell: usize, s0: f64) -> Result<f64, ExpansionError> {
    let q = q_poly::<f64>(spec)?;
    let lambda = spec.lambda_f64();
    let v: Vec<f64> = spec.v.coeffs().iter().map(rational_to_f64).collect();
    let ok_at = |eps_abs: f64| -> bool {
        let e = spec.branch.eps_hat(eps_abs);
        let theta = spec.branch.theta(e);
        (0..=40).all(|i| {
            let s = -s0 + 2.0 * s0 * i as f64 / 40.0;
            let vx = v.iter().rev().fold(0.0, |acc, c| acc * (s + theta) + c);
            let qv = q.eval_f64(s, e);
            (0..=ell).all(|j| {
                let vj = vx - j as f64 / lambda * qv;
                (0.5..=2.0).contains(&vj)
            })
        })
    };
    if !ok_at(0.0) {
        return Ok(0.0);
    }
    let mut best = 0.0;
    for k in (1..=8).rev() {
        for m in [1.0, 2.0, 5.0] {
            let e = m * 10f64.powi(-k);
            if e > 0.1 {
                continue;
            }
            if !ok_at(e) {
                return Ok(best);
            }
            best = e;
        }
    }
    Ok(best)
}

/// Coefficients sampled on an `eps` grid across zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GluedCoefficients {
    pub eps: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    /// `c_j(0^+)`, `c_j(0^-)` from the two branches at `eps_hat = 0`.
    pub at_zero_plus: Vec<f64>,
    pub at_zero_minus: Vec<f64>,
    /// `max |c_j(+delta) - c_j(-delta)|` for the continuity probe `delta`.
    pub continuity_gap: Vec<f64>,
    pub delta: f64,
    /// Valuation `m` of `U` when the vanishing clause was enforced.
    pub vanishing_order: Option<usize>,
}

/// Runs the recursion on both branches of `eps`.
///
/// Continuity is checked exactly at `eps_hat = 0` and in floating point at
/// `eps = +-delta` against `tol`. When `U` has valuation `m` and the negative
/// branch is `theta = 0`, `c_0..c_{m-1}` must vanish exactly for `eps <= 0`.
pub fn glue_two_sided(
    plus: &UnfoldingSpec,
    minus: &UnfoldingSpec,
    ell: usize,
    eps_grid: &[f64],
    delta: f64,
    tol: f64,
) -> Result<GluedCoefficients, ExpansionError> {
    let exact_plus = coefficients::<Rational>(&plus.with_eps_hat(Rational::zero()), ell)?;
    let exact_minus = coefficients::<Rational>(&minus.with_eps_hat(Rational::zero()), ell)?;
    for j in 0..=ell {
        if exact_plus.coeffs[j] != exact_minus.coeffs[j] {
            let gap = rational_to_f64(&(&exact_plus.coeffs[j] - &exact_minus.coeffs[j])).abs();
            return Err(ExpansionError::ContinuityViolation { j, gap });
        }
    }
    let at = |eps: f64| -> Result<Vec<f64>, ExpansionError> {
        let spec = if eps < 0.0 { minus } else { plus };
        let e = spec.branch.eps_hat(eps);
        let s = spec.with_eps_hat(Rational::from_float(e).expect("finite"));
        Ok(coefficients::<f64>(&s, ell)?.coeffs)
    };
    let cp = at(delta)?;
    let cm = at(-delta)?;
    let c0 = at(0.0)?;
    let mut gap = vec![0.0; ell + 1];
    for j in 0..=ell {
        gap[j] = (cp[j] - c0[j]).abs().max((cm[j] - c0[j]).abs());
        if gap[j] > tol {
            return Err(ExpansionError::ContinuityViolation { j, gap: gap[j] });
        }
    }
    let m = minus.u.valuation();
    let vanishing = m.filter(|_| minus.branch.sigma.is_zero());
    let mut coeffs = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        if let (Some(m), true) = (vanishing, eps <= 0.0) {
            let e = minus.branch.eps_hat(eps);
            let s = minus.with_eps_hat(Rational::from_float(e).expect("finite"));
            if let Ok(exact) = coefficients::<Rational>(&s, ell) {
                for j in 0..m.min(ell + 1) {
                    if !exact.coeffs[j].is_zero() {
                        return Err(ExpansionError::VanishingViolation {
                            j,
                            eps,
                            value: rational_to_f64(&exact.coeffs[j]),
                        });
                    }
                }
            }
        }
        coeffs.push(at(eps)?);
    }
    Ok(GluedCoefficients {
        eps: eps_grid.to_vec(),
        coeffs,
        at_zero_plus: exact_plus.coeffs.iter().map(rational_to_f64).collect(),
        at_zero_minus: exact_minus.coeffs.iter().map(rational_to_f64).collect(),
        continuity_gap: gap,
        delta,
        vanishing_order: vanishing,
    })
}

/// Modes `U_n(x)` of `U_a(x, y) = sum_n U_n(x) y^{n-1}`.
#[derive(Clone)]
pub enum ModeSource {
    Finite(Vec<TruncatedSeries<Rational>>),
    /// Infinitely many modes with `||U_n|| <= C r^n` when a certificate is known.
    Geometric {
        mode: Arc<dyn Fn(usize) -> TruncatedSeries<Rational> + Send + Sync>,
        certificate: Option<(f64, f64)>,
    },
}

impl std::fmt::Debug for ModeSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeSource::Finite(m) => f.debug_tuple("Finite").field(&m.len()).finish(),
            ModeSource::Geometric { certificate, .. } => {
                f.debug_struct("Geometric").field("certificate", certificate).finish()
            }
        }
    }
}

/// Data for the time along `P d/dx - V y d/dy` with time form `U_a y dx / P`.
#[derive(Debug, Clone)]
pub struct BiSpec {
    pub family: PolynomialFamily,
    pub branch: PuiseuxBranch,
    pub v: TruncatedSeries<Rational>,
    pub modes: ModeSource,
    pub eps_hat: Rational,
}

impl BiSpec {
    /// Mode `n` as an unfolding spec: `U_n`, `V / V(0)`, `lambda = n V(0)`.
    pub fn mode_spec(&self, n: usize, u: TruncatedSeries<Rational>) -> Result<UnfoldingSpec, ExpansionError> {
        // `new` divides V by V(0) and multiplies lambda by V(0).
        UnfoldingSpec::new(
            self.family.clone(),
            self.branch.clone(),
            self.v.clone(),
            u,
            Rational::from_integer((n as i64).into()),
            self.eps_hat.clone(),
        )
    }
}

const MODE_BATCH: usize = 8;
const MAX_MODES: usize = 4096;

/// Sums per-mode coefficients in increasing `n`. For geometric modes the sum
/// stops at the first `N` with `C gamma r^{N+1} / (1 - r) < tol`, where
/// `gamma` is the largest observed `|c_j| / ||U_n||`.
pub fn dulac_time_coefficients(bispec: &BiSpec, ell: usize, tol: f64) -> Result<ExpansionResult<f64>, ExpansionError> {
    let one = |n: usize, u: TruncatedSeries<Rational>| -> Result<(Vec<f64>, f64), ExpansionError> {
        let norm = u.norm_ell1();
        let spec = bispec.mode_spec(n, u)?;
        let c = if spec.branch.is_exact() {
            coefficients::<Rational>(&spec, ell)?.to_f64().coeffs
        } else {
            coefficients::<f64>(&spec, ell)?.coeffs
        };
        Ok((c, norm))
    };
    let mut total = vec![0.0; ell + 1];
    let mut gamma: f64 = 0.0;
    let (used, tail) = match &bispec.modes {
        ModeSource::Finite(list) => {
            let per: Vec<_> = list.par_iter().enumerate().map(|(i, u)| one(i + 1, u.clone())).collect();
            for r in per {
                let (c, _) = r?;
                for j in 0..=ell {
                    total[j] += c[j];
                }
            }
            (list.len(), 0.0)
        }
        ModeSource::Geometric { mode, certificate } => {
            let (cc, r) = certificate.ok_or(ExpansionError::TailUnbounded)?;
            if !((0.0..1.0).contains(&r) && cc.is_finite()) {
                return Err(ExpansionError::TailUnbounded);
            }
            let mut n = 0;
            loop {
                let batch: Vec<_> = (n + 1..=n + MODE_BATCH).into_par_iter().map(|k| one(k, mode(k))).collect();
                for res in batch {
                    let (c, norm) = res?;
                    n += 1;
                    for j in 0..=ell {
                        total[j] += c[j];
                        if norm > 0.0 {
                            gamma = gamma.max(c[j].abs() / norm);
                        }
                    }
                }
                let tail = cc * gamma * r.powi(n as i32 + 1) / (1.0 - r);
                if tail < tol {
                    break (n, tail);
                }
                if n >= MAX_MODES {
                    return Err(ExpansionError::TailUnbounded);
                }
            }
        }
    };
    let first = bispec.mode_spec(1, TruncatedSeries::zero(0))?;
    Ok(ExpansionResult {
        coeffs: total,
        ell,
        order: working_order(ell, bispec.family.mu(), 0),
        eps: first.eps(),
        eps_hat: first.eps_hat_f64(),
        lambda: first.lambda_f64(),
        branch: bispec.branch.sign,
        validity_flag: true,
        tail_bound: Some(tail),
        modes: Some(used),
    })
}
