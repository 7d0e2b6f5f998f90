//! Global adaptive Gauss-Kronrod 7/15 quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::OracleError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Integrate in `u = log(x - theta)` instead of `x`.
    pub substitution: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-300, max_subdivisions: 4000, substitution: true }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) || self.max_subdivisions == 0 {
            return Err(OracleError::InvalidArgument("quadrature tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
// Gauss weights for the odd Kronrod nodes 1, 3, 5 and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_64, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut lo = [0.0; 7];
    let mut hi = [0.0; 7];
    for i in 0..7 {
        lo[i] = f(c - h * XGK[i]);
        hi[i] = f(c + h * XGK[i]);
    }
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        kron += WGK[i] * (lo[i] + hi[i]);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (lo[i] + hi[i]);
        }
    }
    let value = kron * h;
    let mut error = ((kron - gauss) * h).abs();
    // the usual QUADPACK rescaling of the raw difference
    let mean = 0.5 * kron;
    let mut asc = WGK[7] * (fc - mean).abs();
    for i in 0..7 {
        asc += WGK[i] * ((lo[i] - mean).abs() + (hi[i] - mean).abs());
    }
    asc *= h.abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * (value.abs());
    Piece { a, b, value, error: error.max(floor) }
}

/// `int_a^b f`, bisecting the worst piece until the summed error estimate is
/// below `max(abs_tol, rel_tol |I|)`.
pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<QuadResult, OracleError> {
    integrate_pieces(f, &[a, b], cfg)
}

/// As [`integrate`], starting from the pieces between consecutive `breaks`.
pub fn integrate_pieces(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadResult, OracleError> {
    cfg.validate()?;
    if breaks.len() < 2 || breaks.iter().any(|x| !x.is_finite()) {
        return Err(OracleError::InvalidArgument("integration bounds must be finite".into()));
    }
    if breaks[0] == breaks[breaks.len() - 1] {
        return Ok(QuadResult { value: 0.0, error: 0.0, subdivisions: 0 });
    }
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[0] != w[1] {
            heap.push(gk15(&mut f, w[0], w[1]));
        }
    }
    let mut value: f64 = heap.iter().map(|p| p.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.error).sum();
    if !value.is_finite() {
        return Err(OracleError::QuadratureFailure { value, error: f64::INFINITY, subdivisions: heap.len() });
    }
    let mut count = heap.len();
    loop {
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            break;
        }
        if count >= cfg.max_subdivisions {
            return Err(OracleError::QuadratureFailure { value, error, subdivisions: count });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval exhausted at machine resolution
            return Err(OracleError::QuadratureFailure { value, error, subdivisions: count });
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        count += 1;
        if count % 64 == 0 {
            // resum to shed accumulated cancellation
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult { value, error, subdivisions: count })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(20), 0.0, 1.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn sqrt_singularity_converges() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let cfg = QuadratureConfig::default();
        let a = integrate(f64::exp, 0.0, 2.0, &cfg).unwrap().value;
        let b = integrate(f64::exp, 2.0, 0.0, &cfg).unwrap().value;
        assert!((a + b).abs() < 1e-13);
        assert!((a - (2f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = QuadratureConfig { max_subdivisions: 2, ..Default::default() };
        let r = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, &cfg);
        assert!(matches!(r, Err(OracleError::QuadratureFailure { .. })));
    }
}
