//! The quadratic centre family `u' = -v + uv`, `v' = u + D u^2 + F v^2`:
//! its chart at infinity, the normal form near the polycycle, the `c_1`
//! formula, and the numeric period function.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::expansion::{BiSpec, ExpansionError, ModeSource, UnfoldingSpec};
use crate::family::{biggest_real_root_branch, FamilyError, PolynomialFamily, Side};
use crate::oracle::{self, ode, OdeConfig, OracleError, QuadratureConfig};
use crate::scalar::{rational_to_f64, Rational};
use crate::series::TruncatedSeries;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoudError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point lies on the section v = 0")]
    OnSection,
    #[error("first integral base {base:e} is not positive")]
    BranchCut { base: f64 },
    #[error("g(z, w) = {g:e} is not positive")]
    NegativeG { g: f64 },
    #[error("gamma has a pole at {x}")]
    PoleAtNonPositiveInteger { x: f64 },
    #[error("orbit from s = {s:e} left the period annulus")]
    EscapedAnnulus { s: f64 },
    #[error("no return to the section from s = {s:e}")]
    EventMissed { s: f64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// `(D, F)` with `D in (-1, 0)` and `F > 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct LoudParams {
    pub d: f64,
    pub f: f64,
}

impl LoudParams {
    pub fn new(d: f64, f: f64) -> Result<Self, LoudError> {
        if !(d > -1.0 && d < 0.0) {
            return Err(LoudError::InvalidParams(format!("D = {d} is outside (-1, 0)")));
        }
        if !(f > 0.5) || !f.is_finite() {
            return Err(LoudError::InvalidParams(format!("F = {f} must exceed 1/2")));
        }
        Ok(Self { d, f })
    }

    /// `2 (F - 1)`.
    pub fn eps(&self) -> f64 {
        2.0 * (self.f - 1.0)
    }

    /// `(alpha, beta, gamma)` with `U_a = (alpha x y - beta y^2 + gamma)^{-1/2}`.
    pub fn ua_coefficients(&self) -> (f64, f64, f64) {
        let (d, f) = (self.d, self.f);
        ((2.0 * d + 1.0) / (2.0 * (2.0 * f - 1.0)), (d + 1.0) / (4.0 * f), -d / 2.0)
    }

    pub fn ua(&self, x: f64, y: f64) -> f64 {
        let (a, b, g) = self.ua_coefficients();
        (a * x * y - b * y * y + g).powf(-0.5)
    }

    /// Right-hand side in `(u, v)`.
    pub fn field(&self, u: f64, v: f64) -> (f64, f64) {
        (-v + u * v, u + self.d * u * u + self.f * v * v)
    }

    /// Right-hand side in `(z, w)`, original time.
    pub fn chart_field(&self, z: f64, w: f64) -> (f64, f64) {
        let b = self.chart_b(z, w);
        (z * (1.0 + b) / w, b)
    }

    fn chart_b(&self, z: f64, w: f64) -> f64 {
        let d = self.d;
        -self.f - d * z * z + (2.0 * d + 1.0) * z * w - (d + 1.0) * w * w
    }

    /// `g(z, w)`.
    pub fn g(&self, z: f64, w: f64) -> f64 {
        let (a1, a2) = self.g_coefficients();
        a1 * z * w - a2 * w * w - 1.0 / (2.0 * self.d)
    }

    fn g_coefficients(&self) -> (f64, f64) {
        let (d, f) = (self.d, self.f);
        ((2.0 * d + 1.0) / ((2.0 * f - 1.0) * d), (d + 1.0) / (2.0 * f * d))
    }
}

/// `(z, w) = ((1 - u) / v, 1 / v)`.
pub fn chart_transform(u: f64, v: f64) -> Result<(f64, f64), LoudError> {
    if v == 0.0 {
        return Err(LoudError::OnSection);
    }
    Ok(((1.0 - u) / v, 1.0 / v))
}

pub fn chart_inverse(z: f64, w: f64) -> Result<(f64, f64), LoudError> {
    if w == 0.0 || !w.is_finite() {
        return Err(LoudError::OnSection);
    }
    Ok((1.0 - z / w, 1.0 / w))
}

/// `(w / z) (1 - 2 (F - 1) g / z^2)^{1 / (2 (F - 1))}`; at `F = 1` the
/// limit `(w / z) exp(-g / z^2)`.
pub fn first_integral(z: f64, w: f64, p: &LoudParams) -> Result<f64, LoudError> {
    let r = p.g(z, w) / (z * z);
    let k = p.f - 1.0;
    if k.abs() < 1e-12 {
        return Ok(w / z * (-r).exp());
    }
    let base = 1.0 - 2.0 * k * r;
    if base <= 0.0 {
        return Err(LoudError::BranchCut { base });
    }
    Ok(w / z * (base.ln() / (2.0 * k)).exp())
}

/// `(x, y) = (z, w) / sqrt(g)`.
pub fn normal_coordinates(z: f64, w: f64, p: &LoudParams) -> Result<(f64, f64), LoudError> {
    let g = p.g(z, w);
    if g <= 0.0 {
        return Err(LoudError::NegativeG { g });
    }
    let r = g.sqrt();
    Ok((z / r, w / r))
}

/// `(x^2 - eps) x d/dx - (2F - x^2) y d/dy`, divided by `y U_a`.
pub fn normal_form_field(x: f64, y: f64, p: &LoudParams) -> (f64, f64) {
    let k = 1.0 / (y * p.ua(x, y));
    (k * (x * x - p.eps()) * x, -k * (2.0 * p.f - x * x) * y)
}

/// Relative mismatch between the chart field pushed through
/// [`normal_coordinates`] and [`normal_form_field`].
pub fn normal_form_residual(z: f64, w: f64, p: &LoudParams) -> Result<f64, LoudError> {
    let g = p.g(z, w);
    let (x, y) = normal_coordinates(z, w, p)?;
    let (a1, a2) = p.g_coefficients();
    let (gz, gw) = (a1 * w, a1 * z - 2.0 * a2 * w);
    let (zd, wd) = p.chart_field(z, w);
    let gd = gz * zd + gw * wd;
    let r = g.sqrt();
    let pushed = (zd / r - 0.5 * z * gd / (g * r), wd / r - 0.5 * w * gd / (g * r));
    let target = normal_form_field(x, y, p);
    let scale = target.0.hypot(target.1);
    Ok((pushed.0 - target.0).hypot(pushed.1 - target.1) / scale)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos approximation, reflected below `1/2`.
pub fn gamma(x: f64) -> Result<f64, LoudError> {
    if x <= 0.0 && x == x.floor() {
        return Err(LoudError::PoleAtNonPositiveInteger { x });
    }
    if x == x.floor() && x <= 23.0 {
        // (x-1)! is exact in double precision up to 22!
        return Ok((2..x as u64).fold(1.0, |acc, n| acc * n as f64));
    }
    if x < 0.5 {
        return Ok(PI / ((PI * x).sin() * gamma(1.0 - x)?));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    Ok((2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a)
}

/// `sqrt(pi) (2D + 1) / sqrt(F (D + 1)^3) Gamma((3F - 1) / 2F) / Gamma((4F - 1) / 2F)`.
pub fn c1_hat(p: &LoudParams) -> Result<f64, LoudError> {
    let (d, f) = (p.d, p.f);
    let lead = PI.sqrt() * (2.0 * d + 1.0) / (f * (d + 1.0).powi(3)).sqrt();
    Ok(lead * gamma((3.0 * f - 1.0) / (2.0 * f))? / gamma((4.0 * f - 1.0) / (2.0 * f))?)
}

/// `lim_{F -> 1} c1_hat = 2 (2D + 1) / (D + 1)^{3/2}`.
pub fn c1_hat_limit(d: f64) -> f64 {
    2.0 * (2.0 * d + 1.0) / (d + 1.0).powf(1.5)
}

/// Modes of `U_a` after `x = kappa X`, `y = kappa Y`, with the estimated
/// bound `||U_n|| <= C r^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoudModes {
    pub kappa: f64,
    /// `modes[n - 1][i]` is the coefficient of `X^i` in the `n`-th mode.
    pub modes: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub certificate: (f64, f64),
}

fn binom_half(k: usize) -> f64 {
    // binom(-1/2, k)
    (0..k).fold(1.0, |acc, j| acc * (-0.5 - j as f64) / (j + 1) as f64)
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Mode `n >= 1` of `U_a(x, y) = sum U_n(x) y^{n-1}` (unscaled).
pub fn loud_mode(p: &LoudParams, n: usize) -> Vec<f64> {
    let (a, b, g) = p.ua_coefficients();
    let mut out = vec![0.0; n];
    // k + i = n - 1 with i <= k; the power of x is k - i
    for i in 0..n {
        if 2 * i > n - 1 {
            break;
        }
        let k = n - 1 - i;
        out[k - i] += binom_half(k) * g.powi(-(k as i32)) * binom(k, i) * a.powi((k - i) as i32) * (-b).powi(i as i32);
    }
    let lead = g.powf(-0.5);
    out.iter_mut().for_each(|c| *c *= lead);
    out
}

/// Modes `1..=order` of `U_a(kappa X, kappa Y) / kappa`.
pub fn loud_modes(p: &LoudParams, order: usize, kappa: f64) -> LoudModes {
    let modes: Vec<Vec<f64>> = (1..=order)
        .map(|n| {
            let mut m = loud_mode(p, n);
            let mut pow = kappa.powi(n as i32 - 2);
            for c in m.iter_mut() {
                *c *= pow;
                pow *= kappa;
            }
            m
        })
        .collect();
    let norms: Vec<f64> = modes.iter().map(|m| m.iter().map(|c| c.abs()).sum()).collect();
    LoudModes { kappa, certificate: estimate_certificate(&norms), modes, norms }
}

/// `r` from the growth rate over the later half of the norms, `C` the
/// smallest constant that covers every computed norm.
fn estimate_certificate(norms: &[f64]) -> (f64, f64) {
    let n = norms.len();
    let lo = (n / 2).max(1);
    let r = if n >= 2 && norms[lo - 1] > 0.0 && norms[n - 1] > 0.0 && n > lo {
        (norms[n - 1] / norms[lo - 1]).powf(1.0 / (n - lo) as f64)
    } else {
        norms
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(i, m)| m.powf(1.0 / (i + 1) as f64))
            .fold(0.0, f64::max)
    };
    if r == 0.0 {
        return (norms.first().copied().unwrap_or(0.0), 0.0);
    }
    let c = norms.iter().enumerate().map(|(i, m)| m / r.powi(i as i32 + 1)).fold(0.0f64, f64::max);
    (c, r)
}

fn exact(x: f64) -> Rational {
    Rational::from_float(x).expect("finite")
}

/// The rescaled Dulac-time data: `P = X (X^2 - eps / kappa^2)`,
/// `V = (2F - kappa^2 X^2) / kappa^2` and the modes of [`loud_modes`].
pub fn loud_bispec(p: &LoudParams, kappa: f64, certificate: (f64, f64)) -> Result<BiSpec, LoudError> {
    let family = PolynomialFamily::equi(2);
    let k2 = exact(kappa) * exact(kappa);
    let eps = exact(p.eps()) / &k2;
    let side = if eps < Rational::from_integer(0.into()) { Side::Minus } else { Side::Plus };
    let branch = biggest_real_root_branch(&family, side)?;
    let eps_hat = crate::family::eps_hat_of(&eps, branch.rho);
    let v = TruncatedSeries::new(vec![
        exact(2.0 * p.f) / &k2,
        Rational::from_integer(0.into()),
        -Rational::from_integer(1.into()),
    ]);
    let params = *p;
    let mode = move |n: usize| {
        let m = loud_modes(&params, n, kappa);
        TruncatedSeries::new(m.modes[n - 1].iter().map(|&c| exact(c)).collect())
    };
    Ok(BiSpec {
        family,
        branch,
        v,
        modes: ModeSource::Geometric { mode: std::sync::Arc::new(mode), certificate: Some(certificate) },
        eps_hat,
    })
}

/// The Dulac map of `(x^2 - eps) x d/dx + (2F - x^2) y d/dy` at offset `s`,
/// that is `mu = 2`, `V = 1 - x^2 / (2F)`, `lambda = 2F`.
pub fn dulac_map_node(p: &LoudParams, s: f64, cfg: &QuadratureConfig) -> Result<f64, LoudError> {
    let spec = node_spec(p)?;
    Ok(oracle::dulac_map(&spec, s, cfg)?)
}

fn node_spec(p: &LoudParams) -> Result<UnfoldingSpec, LoudError> {
    let f = exact(p.f);
    let two = Rational::from_integer(2.into());
    let v = TruncatedSeries::new(vec![
        Rational::from_integer(1.into()),
        Rational::from_integer(0.into()),
        -(Rational::from_integer(1.into()) / (&two * &f)),
    ]);
    let eps = &two * (&f - Rational::from_integer(1.into()));
    Ok(UnfoldingSpec::build(
        PolynomialFamily::equi(2),
        v,
        TruncatedSeries::new(vec![Rational::from_integer(0.into())]),
        &two * &f,
        &eps,
    )?)
}

fn period_ode() -> OdeConfig {
    OdeConfig { rtol: 1e-12, atol: 1e-14, h0: 1e-8, h_min: 1e-300, max_steps: 2_000_000 }
}

/// Period of the orbit through `(1 - s, 0)`.
///
/// Near `u = 1` the orbit is followed in `(p, log q)` with
/// `p = v / (1 - u)`, `q = 1 / (1 - u)`; near infinity in `(z, log w)`. Both
/// use a time in which the field is polynomial. The run stops at the next
/// downward crossing of `v = 0` and the half period is doubled.
pub fn period_numeric(p: &LoudParams, s: f64) -> Result<f64, LoudError> {
    if !(s > 0.0 && s < 1.0) {
        return Err(LoudError::InvalidParams(format!("s = {s} must lie in (0, 1)")));
    }
    let (d, f) = (p.d, p.f);
    let cfg = period_ode();
    // state: [p, log q, t] or [z, log w, t]
    let mut state = vec![0.0, (1.0 / s).ln(), 0.0];
    let mut near_line = true;
    for _ in 0..64 {
        if near_line {
            let out = ode::solve(
                |_, y, dy| {
                    let (pp, q) = (y[0], y[1].exp());
                    dy[0] = q * (q - 1.0) + d * (q - 1.0).powi(2) + (f - 1.0) * pp * pp;
                    dy[1] = -pp;
                    dy[2] = q;
                },
                0.0,
                &state,
                1e15,
                &cfg,
                Some(|_: f64, y: &[f64]| y[0] * (y[0] - 1.0)),
            )
            .map_err(|_| LoudError::EscapedAnnulus { s })?;
            if !out.event {
                return Err(LoudError::EventMissed { s });
            }
            let (pp, lq, t) = (out.y[0], out.y[1], out.y[2]);
            if pp < 0.5 {
                return Ok(2.0 * t);
            }
            state = vec![1.0 / pp, lq - pp.ln(), t];
            near_line = false;
        } else {
            let out = ode::solve(
                |_, y, dy| {
                    let (z, w) = (y[0], y[1].exp());
                    let b = -f - d * z * z + (2.0 * d + 1.0) * z * w - (d + 1.0) * w * w;
                    dy[0] = z * (1.0 + b);
                    dy[1] = b;
                    dy[2] = w;
                },
                0.0,
                &state,
                1e15,
                &cfg,
                Some(|_: f64, y: &[f64]| y[0] - 1.0),
            )
            .map_err(|_| LoudError::EscapedAnnulus { s })?;
            if !out.event {
                return Err(LoudError::EventMissed { s });
            }
            let (z, lw, t) = (out.y[0], out.y[1], out.y[2]);
            if !(z > 0.0) {
                return Err(LoudError::EscapedAnnulus { s });
            }
            state = vec![1.0 / z, lw - z.ln(), t];
            near_line = true;
        }
    }
    Err(LoudError::EventMissed { s })
}

/// Times of the first downward and the next upward crossing of `v = 0`,
/// integrating `(u, v)` directly from `(1 - s, 0)`.
pub fn crossing_times_uv(p: &LoudParams, s: f64) -> Result<(f64, f64), LoudError> {
    let cfg = OdeConfig { rtol: 1e-12, atol: 1e-14, h0: 1e-6, h_min: 1e-300, max_steps: 2_000_000 };
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
        let (a, b) = p.field(y[0], y[1]);
        dy[0] = a;
        dy[1] = b;
    };
    let first = ode::solve(rhs, 0.0, &[1.0 - s, 0.0], 1e4, &cfg, Some(|_: f64, y: &[f64]| y[1]))?;
    if !first.event {
        return Err(LoudError::EventMissed { s });
    }
    let second = ode::solve(rhs, first.t, &first.y, first.t + 1e4, &cfg, Some(|_: f64, y: &[f64]| y[1]))?;
    if !second.event {
        return Err(LoudError::EventMissed { s });
    }
    Ok((first.t, second.t))
}

/// Largest relative change of the first integral at `samples` equally spaced
/// times over `[0, t_max]` along the `(u, v)` orbit from `(u0, v0)`.
pub fn first_integral_drift(p: &LoudParams, u0: f64, v0: f64, t_max: f64, samples: usize) -> Result<f64, LoudError> {
    let cfg = OdeConfig { rtol: 1e-10, atol: 1e-12, ..OdeConfig::default() };
    let (z, w) = chart_transform(u0, v0)?;
    let i0 = first_integral(z, w, p)?;
    let mut y = vec![u0, v0];
    let mut t = 0.0;
    let mut worst: f64 = 0.0;
    for k in 1..=samples {
        let t1 = t_max * k as f64 / samples as f64;
        let out = ode::solve(
            |_, y, dy| {
                let (a, b) = p.field(y[0], y[1]);
                dy[0] = a;
                dy[1] = b;
            },
            t,
            &y,
            t1,
            &cfg,
            None::<fn(f64, &[f64]) -> f64>,
        )?;
        y = out.y;
        t = t1;
        if y[1].abs() > 1e-8 {
            let (z, w) = chart_transform(y[0], y[1])?;
            worst = worst.max(((first_integral(z, w, p)? - i0) / i0).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodSample {
    pub s: f64,
    pub period: f64,
    pub derivative: f64,
}

/// One `D` of the regularity sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityRow {
    pub d: f64,
    pub f: f64,
    /// Least-squares `P(s) ~ c0 + c1 s`.
    pub c0: f64,
    pub c1: f64,
    /// Least-squares `P'(s) ~ a + b s`; `a` is the derivative's limit.
    pub derivative_limit: f64,
    /// `1`, `-1`, or `0` when the sign changes across the grid.
    pub derivative_sign: i32,
    pub near_zero: bool,
    pub c1_hat_limit: f64,
    pub regular: bool,
    pub samples: Vec<PeriodSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub rows: Vec<RegularityRow>,
    /// The global constant `o` with `sign P' = o sign(2D + 1)`, if any row fixes it.
    pub orientation: Option<i32>,
    pub coherent: bool,
}

/// `|a| < NEAR_ZERO` flags a derivative limit as vanishing.
pub const NEAR_ZERO: f64 = 0.05;

fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Numeric `P'(s)` by central differences with step `0.05 s` at every grid
/// point, for every `D` at the given `F`.
pub fn regularity_check(d_grid: &[f64], f: f64, s_grid: &[f64]) -> Result<RegularityReport, LoudError> {
    if s_grid.len() < 2 {
        return Err(LoudError::InvalidParams("need at least two s values".into()));
    }
    let rows: Vec<Result<RegularityRow, LoudError>> = d_grid
        .par_iter()
        .map(|&d| {
            let p = LoudParams::new(d, f)?;
            let mut samples = Vec::with_capacity(s_grid.len());
            for &s in s_grid {
                let h = 0.05 * s;
                let derivative = (period_numeric(&p, s + h)? - period_numeric(&p, s - h)?) / (2.0 * h);
                samples.push(PeriodSample { s, period: period_numeric(&p, s)?, derivative });
            }
            let xs: Vec<f64> = samples.iter().map(|r| r.s).collect();
            let (c0, c1) = line_fit(&xs, &samples.iter().map(|r| r.period).collect::<Vec<_>>());
            let (a, _) = line_fit(&xs, &samples.iter().map(|r| r.derivative).collect::<Vec<_>>());
            let pos = samples.iter().all(|r| r.derivative > 0.0);
            let neg = samples.iter().all(|r| r.derivative < 0.0);
            let sign = if pos {
                1
            } else if neg {
                -1
            } else {
                0
            };
            let near_zero = a.abs() < NEAR_ZERO;
            Ok(RegularityRow {
                d,
                f,
                c0,
                c1,
                derivative_limit: a,
                derivative_sign: sign,
                near_zero,
                c1_hat_limit: c1_hat_limit(d),
                regular: false,
                samples,
            })
        })
        .collect();
    let mut rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let orient = |r: &RegularityRow| r.derivative_sign * (2.0 * r.d + 1.0).signum() as i32;
    let orientation = rows.iter().find(|r| !r.near_zero && r.derivative_sign != 0).map(orient);
    for r in rows.iter_mut() {
        r.regular = !r.near_zero && r.derivative_sign != 0 && Some(orient(r)) == orientation;
    }
    let coherent = rows.iter().filter(|r| !r.near_zero).all(|r| r.regular);
    Ok(RegularityReport { rows, orientation, coherent })
}

impl RegularityReport {
    /// `d, f, s, period, derivative` per sample; floats in `{:.16e}`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["d", "f", "s", "period", "derivative"])?;
        for r in &self.rows {
            for p in &r.samples {
                out.write_record([
                    format!("{:.16e}", r.d),
                    format!("{:.16e}", r.f),
                    format!("{:.16e}", p.s),
                    format!("{:.16e}", p.period),
                    format!("{:.16e}", p.derivative),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Value of the node spec's `eps` as a double, for reports.
pub fn node_eps(p: &LoudParams) -> Result<f64, LoudError> {
    Ok(rational_to_f64(&node_spec(p)?.eps_exact()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: f64, f: f64) -> LoudParams {
        LoudParams::new(d, f).unwrap()
    }

    #[test]
    fn chart_round_trip() {
        assert_eq!(chart_transform(0.0, 1.0).unwrap(), (1.0, 1.0));
        for &(u, v) in &[(0.3, -0.7), (-2.0, 0.01), (0.999, 5.0)] {
            let (z, w) = chart_transform(u, v).unwrap();
            let (u2, v2) = chart_inverse(z, w).unwrap();
            assert!((u - u2).abs() < 1e-14 && (v - v2).abs() < 1e-14);
        }
        assert_eq!(chart_transform(0.5, 0.0), Err(LoudError::OnSection));
        assert!(chart_transform(0.5, 1e-300).unwrap().1 > 1e299);
    }

    #[test]
    fn chart_field_matches_uv_field() {
        let p = params(-0.3, 1.2);
        let (u, v) = (0.4, 0.7);
        let (ud, vd) = p.field(u, v);
        let (z, w) = chart_transform(u, v).unwrap();
        let (zd, wd) = p.chart_field(z, w);
        // z = (1 - u) / v, w = 1 / v
        let zd_direct = -ud / v - (1.0 - u) * vd / (v * v);
        let wd_direct = -vd / (v * v);
        assert!((zd - zd_direct).abs() < 1e-12 && (wd - wd_direct).abs() < 1e-12);
    }

    #[test]
    fn g_and_normal_coordinates_on_the_axis() {
        let p = params(-0.25, 1.0);
        assert!((p.g(0.7, 0.0) - 2.0).abs() < 1e-15);
        let (x, y) = normal_coordinates(0.7, 0.0, &p).unwrap();
        assert_eq!(y, 0.0);
        assert!((x - 0.7 * 0.5f64.sqrt()).abs() < 1e-15);
        assert!((p.ua(0.0, 0.0) - (0.125f64).powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn normal_form_matches_pushed_field() {
        for &(d, f) in &[(-0.25, 1.0), (-0.75, 1.1), (-0.6, 0.9)] {
            let p = params(d, f);
            let mut checked = 0;
            for i in 0..10 {
                for j in 0..10 {
                    let (z, w) = (0.05 + 0.11 * i as f64, 0.03 + 0.07 * j as f64);
                    if let Ok(r) = normal_form_residual(z, w, &p) {
                        assert!(r <= 1e-10, "residual {r} at ({z}, {w}) for {p:?}");
                        checked += 1;
                    }
                }
            }
            assert!(checked > 50);
        }
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma(0.5).unwrap() - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
        assert!((gamma(-0.5).unwrap() + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert!(matches!(gamma(-2.0), Err(LoudError::PoleAtNonPositiveInteger { .. })));
    }

    #[test]
    fn c1_hat_examples() {
        assert_eq!(c1_hat(&params(-0.5, 1.3)).unwrap(), 0.0);
        assert!((c1_hat_limit(-0.75) + 8.0).abs() < 1e-12);
        let near = c1_hat(&params(-0.25, 0.999)).unwrap();
        assert!((near - 1.0 / 0.75f64.powf(1.5)).abs() < 1e-2);
        assert!((c1_hat(&params(-0.25, 1.0)).unwrap() - c1_hat_limit(-0.25)).abs() < 1e-13);
    }

    #[test]
    fn modes_of_ua() {
        let p = params(-0.4, 1.0);
        let (a, b, g) = p.ua_coefficients();
        let m = loud_modes(&p, 12, 1.0);
        assert_eq!(m.modes[0], vec![g.powf(-0.5)]);
        // U_2 = -(1/2) g^{-3/2} alpha x
        assert!((m.modes[1][1] + 0.5 * g.powf(-1.5) * a).abs() < 1e-14);
        // re-summing at a point inside the disc of convergence
        let (x, y): (f64, f64) = (0.3, 0.2);
        let sum: f64 = m
            .modes
            .iter()
            .enumerate()
            .map(|(n, c)| c.iter().rev().fold(0.0, |acc, k| acc * x + k) * y.powi(n as i32))
            .sum();
        assert!((sum - p.ua(x, y)).abs() < 1e-9, "{sum} vs {}", p.ua(x, y));
        let _ = b;
        let half = loud_modes(&params(-0.5, 1.0), 4, 1.0);
        assert!(half.modes[1].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn rescaled_modes_decay() {
        let m = loud_modes(&params(-0.25, 1.0), 40, 0.2);
        let (c, r) = m.certificate;
        assert!(r < 0.5, "r = {r}");
        assert!(loud_modes(&params(-0.25, 1.0), 40, 1.0).certificate.1 > 1.0);
        assert!(m.norms.iter().enumerate().all(|(i, x)| *x <= c * r.powi(i as i32 + 1) * (1.0 + 1e-12)));
        let tail: f64 = m.norms.iter().sum();
        assert!(tail.is_finite());
    }

    #[test]
    fn node_dulac_map() {
        let cfg = QuadratureConfig::default();
        let p = params(-0.25, 1.0);
        // eps = 0, lambda = 2: D(s) = e^{1 - 1/s^2} / s
        for &s in &[0.3, 0.5, 0.9] {
            let d = dulac_map_node(&p, s, &cfg).unwrap();
            let exact = (1.0 - 1.0 / (s * s)).exp() / s;
            assert!((d - exact).abs() < 1e-10 * exact, "{d} vs {exact}");
        }
        let q = params(-0.25, 1.05);
        let a = dulac_map_node(&q, 0.01, &cfg).unwrap();
        let b = dulac_map_node(&q, 0.02, &cfg).unwrap();
        assert!(a / 0.01 < 1e-6 && a < b);
        assert!((node_eps(&q).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn period_matches_direct_integration() {
        let p = params(-0.25, 1.0);
        let s = 0.4;
        let (half, full) = crossing_times_uv(&p, s).unwrap();
        assert!((full - 2.0 * half).abs() < 1e-8 * full);
        let per = period_numeric(&p, s).unwrap();
        assert!((per - full).abs() < 1e-8 * full, "{per} vs {full}");
    }

    #[test]
    fn first_integral_is_conserved() {
        for &f in &[1.0, 1.2] {
            let p = params(-0.25, f);
            let (_, period) = crossing_times_uv(&p, 0.5).unwrap();
            let drift = first_integral_drift(&p, 0.5, 1e-3, period, 50).unwrap();
            assert!(drift <= 1e-6, "drift {drift}");
        }
    }
}
