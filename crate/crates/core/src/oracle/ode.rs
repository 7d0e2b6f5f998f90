//! Dormand-Prince 5(4) with the 4th-order continuous extension and a single
//! terminal event.

use serde::{Deserialize, Serialize};

use super::OracleError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-14, h0: 1e-3, h_min: 1e-14, max_steps: 200_000 }
    }
}

/// Where the integration stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeOutcome {
    pub t: f64,
    pub y: Vec<f64>,
    pub event: bool,
    pub steps: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension over one accepted step.
struct Dense {
    t: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Dense {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i] + th * (self.r[1][i] + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
    }
}

/// Integrates `y' = f(t, y)` from `t0` towards `t_end` (either direction).
/// With `event = Some(g)` the run stops at the first sign change of
/// `g(t, y)`, located on the dense output to machine resolution in `t`.
pub fn solve<F, G>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &OdeConfig,
    mut event: Option<G>,
) -> Result<OdeOutcome, OracleError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(f64, &[f64]) -> f64,
{
    if !(cfg.rtol > 0.0 && cfg.atol > 0.0) {
        return Err(OracleError::InvalidArgument("ODE tolerances must be positive".into()));
    }
    let n = y0.len();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut h = cfg.h0.abs().min((t_end - t0).abs()).max(cfg.h_min) * dir;
    let mut g_prev = event.as_mut().map(|g| g(t, &y));
    f(t, &y, &mut k[0]);
    let mut steps = 0;
    let mut rejected_last = false;

    while (t_end - t) * dir > 0.0 {
        if steps >= cfg.max_steps {
            return Err(OracleError::ToleranceNotMet { steps });
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        macro_rules! stage {
            ($dst:expr, $c:expr, $($a:expr => $ki:expr),+) => {{
                for i in 0..n {
                    tmp[i] = y[i] + h * (0.0 $(+ $a * k[$ki][i])+);
                }
                f(t + $c * h, &tmp, &mut k[$dst]);
            }};
        }
        stage!(1, C2, A21 => 0);
        stage!(2, C3, A31 => 0, A32 => 1);
        stage!(3, C4, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, C5, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, 1.0, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        f(t + h, &y1, &mut k[6]);
        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            if h.abs() < cfg.h_min {
                return Err(OracleError::StepSizeUnderflow { t });
            }
            rejected_last = true;
            continue;
        }
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            if h.abs() < cfg.h_min {
                return Err(OracleError::StepSizeUnderflow { t });
            }
            rejected_last = true;
            continue;
        }
        steps += 1;

        if let (Some(g), Some(gp)) = (event.as_mut(), g_prev) {
            let g1 = g(t + h, &y1);
            // a zero at the start of the run does not count as a crossing
            if gp != 0.0 && (g1 == 0.0 || gp.signum() != g1.signum()) {
                let dense = dense_output(t, h, &y, &y1, &k);
                let (te, ye) = locate(g, &dense, t, t + h, gp, g1, n);
                return Ok(OdeOutcome { t: te, y: ye, event: true, steps });
            }
            if g1 != 0.0 {
                g_prev = Some(g1);
            }
        }

        t += h;
        y.copy_from_slice(&y1);
        k.swap(0, 6);
        let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
        if rejected_last {
            fac = fac.min(1.0);
        }
        rejected_last = false;
        h *= fac;
    }
    Ok(OdeOutcome { t, y, event: false, steps })
}

fn dense_output(t: f64, h: f64, y0: &[f64], y1: &[f64], k: &[Vec<f64>; 7]) -> Dense {
    let n = y0.len();
    let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    for i in 0..n {
        let dy = y1[i] - y0[i];
        let bspl = h * k[0][i] - dy;
        r[0][i] = y0[i];
        r[1][i] = dy;
        r[2][i] = bspl;
        r[3][i] = dy - h * k[6][i] - bspl;
        r[4][i] = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
    }
    Dense { t, h, r }
}

/// Illinois false position on the dense output.
fn locate<G: FnMut(f64, &[f64]) -> f64>(
    g: &mut G,
    dense: &Dense,
    mut a: f64,
    mut b: f64,
    mut ga: f64,
    mut gb: f64,
    n: usize,
) -> (f64, Vec<f64>) {
    let mut y = vec![0.0; n];
    let mut side = 0;
    for _ in 0..200 {
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        if c == a || c == b {
            break;
        }
        dense.eval(c, &mut y);
        let gc = g(c, &y);
        if gc == 0.0 {
            return (c, y);
        }
        if gc.signum() == ga.signum() {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
    }
    dense.eval(b, &mut y);
    (b, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    type NoEvent = fn(f64, &[f64]) -> f64;

    #[test]
    fn exponential_decay() {
        let cfg = OdeConfig { rtol: 1e-11, atol: 1e-14, ..Default::default() };
        let out = solve(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], 3.0, &cfg, None::<NoEvent>).unwrap();
        assert!((out.y[0] - (-3f64).exp()).abs() < 1e-11);
        assert!(!out.event);
    }

    #[test]
    fn backward_harmonic_oscillator() {
        let cfg = OdeConfig { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let out = solve(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            -2.0,
            &cfg,
            None::<NoEvent>,
        )
        .unwrap();
        assert!((out.y[0] - (-2f64).sin()).abs() < 1e-9);
    }

    #[test]
    fn event_is_located_on_dense_output() {
        // y = e^t crosses 5 at t = ln 5
        let cfg = OdeConfig::default();
        let out =
            solve(|_, y, dy| dy[0] = y[0], 0.0, &[1.0], 10.0, &cfg, Some(|_: f64, y: &[f64]| y[0] - 5.0)).unwrap();
        assert!(out.event);
        assert!((out.t - 5f64.ln()).abs() < 1e-8);
    }
}
