//! Independent numerics for the quantities the recursion predicts: the Dulac
//! map, the particular solution `y_L`, trajectories, the Dulac time and the
//! flatness of remainders.
//!
//! Every integral near the node is taken in `u = log(x - theta)`, where
//! `P(theta + e^u) = e^u Qo(e^u)` and the pole disappears. ODE runs use the
//! passage variable `w = lambda int V / P`, in which the flow is not stiff.

mod flatness;
pub mod ode;
pub mod quadrature;

use num_traits::Zero;

use crate::expansion::{partial_sum, theta_in, BiSpec, ExpansionError, UnfoldingSpec};
use crate::family::{FamilyError, PolynomialFamily, Side};
use crate::scalar::{Rational, Scalar};
use crate::series::TruncatedSeries;

pub use flatness::{
    fit_loglog_slope, flatness_report, FlatnessCase, FlatnessGrid, FlatnessReport, FlatnessRow, Sampled,
};
pub use ode::OdeConfig;
pub use quadrature::{integrate, integrate_pieces, QuadResult, QuadratureConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature budget exhausted after {subdivisions} pieces (value {value:e}, error {error:e})")]
    QuadratureFailure { value: f64, error: f64, subdivisions: usize },
    #[error("step size underflow at t = {t:e}")]
    StepSizeUnderflow { t: f64 },
    #[error("tolerance not met within {steps} steps")]
    ToleranceNotMet { steps: usize },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
}

/// Past this passage value `e^{-w}` is below the smallest subnormal.
pub const PASSAGE_CUTOFF: f64 = 745.0;

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// `P_eps(x) d/dx` near its biggest real root, with a weight `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    theta: f64,
    qo: Vec<f64>,
    v: Vec<f64>,
}

impl NodeField {
    pub fn new(family: &PolynomialFamily, eps: &Rational, v: &TruncatedSeries<Rational>) -> Result<Self, OracleError> {
        let theta = family.largest_real_root(eps).ok_or(FamilyError::NoRealRoot { eps: eps.to_f64_lossy() })?;
        Ok(Self { theta, qo: family.shifted_quotient(eps, theta), v: v.to_f64().into_coeffs() })
    }

    /// Field of an unfolding spec (with its normalized `V`).
    pub fn from_spec(spec: &UnfoldingSpec) -> Result<Self, OracleError> {
        Self::new(&spec.family, &spec.eps_exact(), &spec.v)
    }

    /// Field of a bispec (with the raw `V`).
    pub fn from_bispec(bispec: &BiSpec) -> Result<Self, OracleError> {
        let e = Scalar::powi(&bispec.eps_hat, bispec.branch.rho);
        let eps = if bispec.branch.sign == Side::Minus { -e } else { e };
        Self::new(&bispec.family, &eps, &bispec.v)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `Qo(s)` with `P(theta + s) = s Qo(s)`.
    pub fn qo(&self, s: f64) -> f64 {
        horner(&self.qo, s)
    }

    pub fn v(&self, x: f64) -> f64 {
        horner(&self.v, x)
    }

    /// `V / P dx` in the log variable.
    fn rate(&self, u: f64) -> f64 {
        let s = u.exp();
        self.v(self.theta + s) / self.qo(s)
    }

    fn check_offsets(&self, s: f64, x_off: f64) -> Result<(), OracleError> {
        if !(s > 0.0 && s <= x_off * (1.0 + 4.0 * f64::EPSILON)) || self.theta + x_off > 1.0 + 1e-12 {
            return Err(OracleError::InvalidArgument(format!(
                "need 0 < s <= x - theta and x <= 1 (s = {s:e}, x - theta = {x_off:e})"
            )));
        }
        Ok(())
    }

    /// `int V / P` from `theta + s` to `theta + x_off`.
    pub fn passage_integral(&self, s: f64, x_off: f64, cfg: &QuadratureConfig) -> Result<f64, OracleError> {
        self.check_offsets(s, x_off)?;
        if s >= x_off {
            return Ok(0.0);
        }
        let r = if cfg.substitution {
            integrate(|u| self.rate(u), s.ln(), x_off.ln(), cfg)?
        } else {
            integrate(|t| self.v(self.theta + t) / (t * self.qo(t)), s, x_off, cfg)?
        };
        Ok(r.value)
    }
}

/// `log D(s + theta)` with `D(1) = 1`: `-lambda int_{s+theta}^1 V / P`.
pub fn log_dulac_map(spec: &UnfoldingSpec, s: f64, cfg: &QuadratureConfig) -> Result<f64, OracleError> {
    let field = NodeField::from_spec(spec)?;
    let i = field.passage_integral(s, 1.0 - field.theta, cfg)?;
    Ok(-spec.lambda_f64() * i)
}

/// `D(s + theta)`; underflow to `0` is a regular outcome.
pub fn dulac_map(spec: &UnfoldingSpec, s: f64, cfg: &QuadratureConfig) -> Result<f64, OracleError> {
    Ok(log_dulac_map(spec, s, cfg)?.exp())
}

/// `y(x; s) = exp(-int_s^x V / P)` along `P d/dx - V y d/dy`; `s` and `x`
/// are positions, not offsets.
pub fn trajectory_y(field: &NodeField, s: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64, OracleError> {
    let th = field.theta;
    Ok((-field.passage_integral(s - th, x - th, cfg)?).exp())
}

/// One run of `ds/dw = s Qo(s) / (lambda V)`, `dI/dw = g(s) e^{-w} / (lambda V)`
/// from offset `s` until `theta + s` reaches `x0` or `w` the cutoff.
/// Returns `I` and the passage `W` (infinite when the cutoff came first).
fn passage_run(
    field: &NodeField,
    lambda: f64,
    s: f64,
    x0: f64,
    g: &dyn Fn(f64) -> f64,
    cfg: &OdeConfig,
) -> Result<(f64, f64), OracleError> {
    let end = (x0 - field.theta).ln();
    let th = field.theta;
    let out = ode::solve(
        |w, y, dy| {
            let off = y[0].exp();
            let lv = lambda * field.v(th + off);
            dy[0] = field.qo(off) / lv;
            dy[1] = g(off) * (-w).exp() / lv;
        },
        0.0,
        &[s.ln(), 0.0],
        PASSAGE_CUTOFF,
        cfg,
        Some(|_: f64, y: &[f64]| y[0] - end),
    )?;
    Ok((out.y[1], if out.event { out.t } else { f64::INFINITY }))
}

fn check_particular(field: &NodeField, x0: f64, s: f64) -> Result<(), OracleError> {
    if !(x0 <= 1.0 + 1e-12) {
        return Err(OracleError::InvalidArgument(format!("x0 = {x0} exceeds 1")));
    }
    field.check_offsets(s, x0 - field.theta)
}

/// `y_L(s + theta)` for `P y' = lambda V y - U`, `y(x0) = 0`.
pub fn particular_solution(spec: &UnfoldingSpec, x0: f64, s: f64, cfg: &OdeConfig) -> Result<f64, OracleError> {
    let field = NodeField::from_spec(spec)?;
    check_particular(&field, x0, s)?;
    if s >= x0 - field.theta {
        return Ok(0.0);
    }
    let u = spec.u.to_f64().into_coeffs();
    let th = field.theta;
    let (i, _) = passage_run(&field, spec.lambda_f64(), s, x0, &|off| horner(&u, th + off), cfg)?;
    Ok(i)
}

/// `y_L(s + theta)` again, as `int U / P exp(-lambda int V / P)` by nested
/// quadrature in the log variable.
pub fn particular_solution_quadrature(
    spec: &UnfoldingSpec,
    x0: f64,
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, OracleError> {
    let field = NodeField::from_spec(spec)?;
    check_particular(&field, x0, s)?;
    let u = spec.u.to_f64().into_coeffs();
    let th = field.theta;
    nested_passage(&field, spec.lambda_f64(), s, x0 - th, &|x, _| horner(&u, x), cfg)
}

/// `int_{ln s}^{ln x_off} h(x, y) y / Qo du` with `y = exp(-lambda G(u))` and
/// `G` the passage integral from `ln s`. Values of `G` are memoized at every
/// outer node and extended from the nearest node below.
fn nested_passage(
    field: &NodeField,
    lambda: f64,
    s: f64,
    x_off: f64,
    h: &dyn Fn(f64, f64) -> f64,
    cfg: &QuadratureConfig,
) -> Result<f64, OracleError> {
    if s >= x_off {
        return Ok(0.0);
    }
    let (a, b) = (s.ln(), x_off.ln());
    let inner = QuadratureConfig { rel_tol: 1e-13, abs_tol: 1e-300, ..*cfg };
    let mut memo: Vec<(f64, f64)> = vec![(a, 0.0)];
    let mut failure: Option<OracleError> = None;
    // initial pieces resolve the first unit of lambda G near the start
    let scale = 1.0 / (lambda * field.rate(a));
    let mut breaks = vec![a];
    let mut step = scale;
    while a + step < b {
        breaks.push(a + step);
        step *= 2.0;
    }
    breaks.push(b);
    let th = field.theta;
    let r = integrate_pieces(
        |u| {
            let k = memo.partition_point(|p| p.0 <= u) - 1;
            let (u0, g0) = memo[k];
            let g = if u == u0 {
                g0
            } else {
                match integrate(|v| field.rate(v), u0, u, &inner) {
                    Ok(r) => g0 + r.value,
                    Err(e) => {
                        failure.get_or_insert(e);
                        return 0.0;
                    }
                }
            };
            memo.insert(k + 1, (u, g));
            let y = (-lambda * g).exp();
            if y == 0.0 {
                return 0.0;
            }
            let off = u.exp();
            h(th + off, y) * y / field.qo(off)
        },
        &breaks,
        cfg,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// `Sigma` and `R = y_L - Sigma` at `s + theta`. The remainder is integrated
/// directly: `R` solves the same equation with right-hand side
/// `U~ = U + P Sigma' - lambda V Sigma`, which is `O(s^{ell+1})`, and with
/// `R(x0) = -Sigma(x0 - theta)`.
pub fn remainder<T: Scalar>(
    spec: &UnfoldingSpec,
    coeffs: &[T],
    x0: f64,
    s: f64,
    cfg: &OdeConfig,
) -> Result<f64, OracleError> {
    let field = NodeField::from_spec(spec)?;
    check_particular(&field, x0, s)?;
    let u_tilde = remainder_source(spec, coeffs)?;
    let end = x0 - field.theta;
    let (i, w) = if s >= end {
        (0.0, 0.0)
    } else {
        passage_run(&field, spec.lambda_f64(), s, x0, &|off| horner(&u_tilde, off), cfg)?
    };
    Ok(i - partial_sum(coeffs, end) * (-w).exp())
}

/// Coefficients in `s` of `U(s + theta) + P(s + theta) Sigma'(s) - lambda V(s + theta) Sigma(s)`,
/// computed in `T` and rounded at the end.
pub fn remainder_source<T: Scalar>(spec: &UnfoldingSpec, coeffs: &[T]) -> Result<Vec<f64>, OracleError> {
    let theta: T = theta_in(spec)?;
    let p: Vec<T> = spec.family.at_eps(&spec.eps_exact()).iter().map(T::from_rational).collect();
    let n = p.len() + spec.u.order() + spec.v.order() + coeffs.len() + 2;
    let lift = |c: &[T]| TruncatedSeries::from_poly(c, n).shift(&theta);
    let mut ps = lift(&p);
    // drop the (rounding-level or exact zero) value at the root
    let mut pc = ps.coeffs().to_vec();
    pc[0] = T::zero();
    ps = TruncatedSeries::new(pc);
    let u = lift(&spec.u.coeffs().iter().map(T::from_rational).collect::<Vec<_>>());
    let v = lift(&spec.v.coeffs().iter().map(T::from_rational).collect::<Vec<_>>());
    let sigma = TruncatedSeries::from_poly(coeffs, n);
    let dsigma = if coeffs.is_empty() {
        TruncatedSeries::zero(n)
    } else {
        sigma.derivative().map_err(ExpansionError::from)?.truncate(n)
    };
    let lambda = T::from_rational(&spec.lambda);
    let out = u.add(&ps.mul(&dsigma)).sub(&v.mul(&sigma).scale(&lambda));
    let mut c: Vec<f64> = out.coeffs().iter().map(|x| x.to_f64_lossy()).collect();
    while c.last().is_some_and(|x| x.is_zero()) {
        c.pop();
    }
    Ok(c)
}

/// `T(s) = int_{s+theta}^1 U_a(x, y(x; s)) y(x; s) / P(x) dx` for the bispec's
/// raw `V`.
pub fn dulac_time(
    bispec: &BiSpec,
    ua: &dyn Fn(f64, f64) -> f64,
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, OracleError> {
    let field = NodeField::from_bispec(bispec)?;
    dulac_time_in(&field, ua, s, cfg)
}

/// [`dulac_time`] on a prepared field.
pub fn dulac_time_in(
    field: &NodeField,
    ua: &dyn Fn(f64, f64) -> f64,
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, OracleError> {
    let end = 1.0 - field.theta;
    field.check_offsets(s, end)?;
    nested_passage(field, 1.0, s, end, ua, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::coefficients;
    use crate::scalar::rat;

    fn series(v: &[i64]) -> TruncatedSeries<Rational> {
        TruncatedSeries::new(v.iter().map(|&c| rat(c, 1)).collect())
    }

    fn spec(mu: u32, v: &[i64], u: &[i64], lambda: i64, eps: Rational) -> UnfoldingSpec {
        UnfoldingSpec::build(PolynomialFamily::equi(mu), series(v), series(u), rat(lambda, 1), &eps).unwrap()
    }

    fn euler() -> UnfoldingSpec {
        spec(1, &[1], &[0, -1], 1, rat(0, 1))
    }

    fn qcfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn ocfg() -> OdeConfig {
        OdeConfig { rtol: 1e-12, atol: 1e-300, ..Default::default() }
    }

    #[test]
    fn dulac_map_closed_form() {
        for &(lambda, s) in &[(1, 0.5), (1, 0.05), (3, 0.2)] {
            let sp = spec(1, &[1], &[1], lambda, rat(0, 1));
            let d = dulac_map(&sp, s, &qcfg()).unwrap();
            let exact = (lambda as f64 * (1.0 - 1.0 / s)).exp();
            assert!((d - exact).abs() <= 1e-10 * exact, "{d} vs {exact}");
        }
    }

    #[test]
    fn dulac_map_at_section_is_one() {
        let sp = spec(2, &[1, 1], &[1], 2, rat(1, 100));
        let th = sp.theta_f64();
        assert_eq!(dulac_map(&sp, 1.0 - th, &qcfg()).unwrap(), 1.0);
    }

    #[test]
    fn dulac_map_lambda_doubling_squares() {
        let a = spec(2, &[2, 1], &[1], 3, rat(1, 100));
        let b = spec(2, &[2, 1], &[1], 6, rat(1, 100));
        let (da, db) = (dulac_map(&a, 0.3, &qcfg()).unwrap(), dulac_map(&b, 0.3, &qcfg()).unwrap());
        assert!((da * da - db).abs() <= 1e-12 * db);
    }

    #[test]
    fn dulac_map_underflows_to_zero() {
        let sp = spec(1, &[1], &[1], 25, rat(0, 1));
        assert_eq!(dulac_map(&sp, 1e-3, &qcfg()).unwrap(), 0.0);
    }

    #[test]
    fn dulac_map_rejects_out_of_range() {
        let sp = euler();
        assert!(dulac_map(&sp, 0.0, &qcfg()).is_err());
        assert!(dulac_map(&sp, 1.5, &qcfg()).is_err());
    }

    #[test]
    fn trajectory_closed_form() {
        let f = NodeField::new(&PolynomialFamily::equi(1), &rat(0, 1), &series(&[1])).unwrap();
        assert_eq!(trajectory_y(&f, 0.2, 0.2, &qcfg()).unwrap(), 1.0);
        let y = trajectory_y(&f, 0.1, 0.4, &qcfg()).unwrap();
        let exact = (1.0f64 / 0.4 - 1.0 / 0.1).exp();
        assert!((y - exact).abs() <= 1e-10 * exact);
        assert!(trajectory_y(&f, 0.1, 0.5, &qcfg()).unwrap() < y);
    }

    #[test]
    fn particular_solution_zero_source() {
        let sp = spec(1, &[1], &[0], 1, rat(0, 1));
        assert_eq!(particular_solution(&sp, 1.0, 0.1, &ocfg()).unwrap(), 0.0);
    }

    #[test]
    fn euler_particular_solution_two_ways() {
        let sp = euler();
        let a = particular_solution(&sp, 1.0, 0.1, &ocfg()).unwrap();
        let b = particular_solution_quadrature(&sp, 1.0, 0.1, &qcfg()).unwrap();
        // e^{-1/x} int_x^1 (-1/t) e^{1/t} dt at x = 0.1, evaluated on its own
        let c = -(-10f64).exp()
            * integrate(|t: f64| (1.0 / t).exp() / t, 0.1, 1.0, &QuadratureConfig { rel_tol: 1e-13, ..qcfg() })
                .unwrap()
                .value;
        assert!((a - c).abs() <= 1e-9 * c.abs(), "{a} vs {c}");
        assert!((b - c).abs() <= 1e-9 * c.abs(), "{b} vs {c}");
    }

    #[test]
    fn particular_solution_vanishes_linearly_at_x0() {
        let sp = spec(1, &[1], &[1], 2, rat(1, 100));
        let x0 = 0.5;
        let th = sp.theta_f64();
        let d = 1e-6;
        let y = particular_solution(&sp, x0, x0 - th - d, &ocfg()).unwrap();
        // y ~ U(x0) / P(x0) (x0 - x)
        let slope = 1.0 / (x0 * (x0 - 0.01));
        assert!((y / d - slope).abs() < 1e-4 * slope);
    }

    #[test]
    fn remainder_matches_difference_at_moderate_s() {
        let sp = euler();
        let c = coefficients::<Rational>(&sp, 3).unwrap().coeffs;
        for &s in &[0.2, 0.05] {
            let r = remainder(&sp, &c, 1.0, s, &ocfg()).unwrap();
            let y = particular_solution(&sp, 1.0, s, &ocfg()).unwrap();
            let direct = y - partial_sum(&c, s);
            assert!((r - direct).abs() < 1e-10 * y.abs(), "{r} vs {direct}");
        }
    }

    #[test]
    fn remainder_source_vanishes_to_order() {
        let sp = spec(2, &[2, 1], &[1, 3], 3, rat(1, 100));
        let c = coefficients::<Rational>(&sp, 3).unwrap().coeffs;
        let src = remainder_source(&sp, &c).unwrap();
        assert!(src[..4].iter().all(|x| *x == 0.0), "{src:?}");
        assert!(src[4] != 0.0);
    }

    #[test]
    fn single_mode_time_is_a_particular_solution() {
        let family = PolynomialFamily::equi(1);
        let v = series(&[2, 1]);
        let u1 = series(&[1, 1]);
        let eps = rat(1, 100);
        let bi = BiSpec {
            family: family.clone(),
            branch: crate::family::biggest_real_root_branch(&family, Side::Plus).unwrap(),
            v: v.clone(),
            modes: crate::expansion::ModeSource::Finite(vec![u1.clone()]),
            eps_hat: rat(1, 100),
        };
        let ua = |x: f64, _y: f64| 1.0 + x;
        let one = bi.mode_spec(1, u1).unwrap();
        assert_eq!(one.eps_exact(), eps);
        for &s in &[0.3, 0.05] {
            let t = dulac_time(&bi, &ua, s, &qcfg()).unwrap();
            let y = particular_solution(&one, 1.0, s, &ocfg()).unwrap();
            assert!((t - y).abs() < 1e-9 * y.abs(), "{t} vs {y}");
        }
        let zero = dulac_time(&bi, &|_, _| 0.0, 0.05, &qcfg()).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn dulac_time_shrinks_with_shorter_passage() {
        // P = x^2, V = 1, U_a = 1: T(s) = 1 - e^{1 - 1/s}
        let family = PolynomialFamily::equi(1);
        let bi = BiSpec {
            family: family.clone(),
            branch: crate::family::biggest_real_root_branch(&family, Side::Plus).unwrap(),
            v: series(&[1]),
            modes: crate::expansion::ModeSource::Finite(vec![series(&[1])]),
            eps_hat: rat(0, 1),
        };
        let mut last = f64::INFINITY;
        for &s in &[0.01, 0.05, 0.2, 0.6] {
            let t = dulac_time(&bi, &|_, _| 1.0, s, &qcfg()).unwrap();
            assert!((t - (1.0 - (1.0 - 1.0 / s).exp())).abs() < 1e-10);
            assert!(t < last);
            last = t;
        }
    }
}
