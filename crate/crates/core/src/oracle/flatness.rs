//! Remainder flatness: `h_ell = (value - Sigma_ell) / s^ell` and its
//! log-derivatives on a logarithmic grid.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::OracleError;
use crate::expansion::{partial_sum, ExpansionResult};

/// What the sampling function returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampled {
    /// The oracle value; `Sigma_ell` is subtracted here.
    Value,
    /// The remainder `value - Sigma_ell` itself.
    Remainder,
}

/// One parameter point `(eps, lambda, a)` with its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessCase {
    pub eps: f64,
    pub lambda: f64,
    pub a_index: usize,
    pub coeffs: Vec<f64>,
}

impl FlatnessCase {
    pub fn from_expansion(a_index: usize, e: &ExpansionResult<f64>) -> Self {
        Self { eps: e.eps, lambda: e.lambda, a_index, coeffs: e.coeffs.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessGrid {
    /// Ascending, evenly spaced in `log s`.
    pub s: Vec<f64>,
    pub cases: Vec<FlatnessCase>,
}

impl FlatnessGrid {
    pub fn log(s_min: f64, s_max: f64, n: usize, cases: Vec<FlatnessCase>) -> Result<Self, OracleError> {
        if !(s_min > 0.0 && s_max > s_min) || n < 2 {
            return Err(OracleError::InvalidArgument("flatness grid needs 0 < s_min < s_max and n >= 2".into()));
        }
        let d = (s_max / s_min).ln() / (n - 1) as f64;
        Ok(Self { s: (0..n).map(|i| s_min * (i as f64 * d).exp()).collect(), cases })
    }

    /// `[1e-4, 1e-1]` with 40 points.
    pub fn standard(cases: Vec<FlatnessCase>) -> Self {
        Self::log(1e-4, 1e-1, 40, cases).expect("valid grid")
    }

    fn log_step(&self) -> f64 {
        (self.s[1] / self.s[0]).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessRow {
    pub s: f64,
    pub eps: f64,
    pub lambda: f64,
    pub a_index: usize,
    pub value: f64,
    pub h: f64,
    /// `Theta^r h` for `r = 1..=k`.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub ell: usize,
    pub k: usize,
    pub tol: f64,
    pub sampled: Sampled,
    pub s: Vec<f64>,
    #[serde(skip)]
    pub rows: Vec<FlatnessRow>,
    /// `sup_curve[r][i] = max over cases |Theta^r h(s_i)|`.
    pub sup_curve: Vec<Vec<f64>>,
    pub decay_ok: Vec<bool>,
    /// Least-squares slope of `log sup_curve[r]` against `log s`.
    pub slopes: Vec<Option<f64>>,
    pub verdict: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `d^r/dtau^r` at index `i` of values spaced `d` in `tau`: central
/// differences at steps `2d` and `4d`, extrapolated once.
fn log_derivative(h: &[f64], i: usize, r: usize, d: f64) -> f64 {
    let diff = |m: usize| -> f64 {
        let mut acc = 0.0;
        for j in 0..=r {
            let off = (r as i64 - 2 * j as i64) * m as i64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom(r, j) * h[(i as i64 + off) as usize];
        }
        acc / (2.0 * m as f64 * d).powi(r as i32)
    };
    (4.0 * diff(1) - diff(2)) / 3.0
}

/// Least-squares slope of `log y` against `log x` over the points with
/// positive finite `y`; `None` with fewer than three such points.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Samples `values_fn` on the grid (extended by `2k` log-steps on both sides
/// for the differences) and judges each `Theta^r h_ell`, `r <= k`: the sup
/// over cases must be below `tol` at the smallest `s` and non-increasing as
/// `s` decreases over the last decade of the grid.
pub fn flatness_report<F>(
    values_fn: F,
    sampled: Sampled,
    grid: &FlatnessGrid,
    ell: usize,
    k: usize,
    tol: f64,
) -> FlatnessReport
where
    F: Fn(&FlatnessCase, f64) -> Result<f64, OracleError> + Sync,
{
    let n = grid.s.len();
    let d = grid.log_step();
    let pad = 2 * k;
    let ext: Vec<f64> = (0..n + 2 * pad).map(|j| grid.s[0] * ((j as f64 - pad as f64) * d).exp()).collect();
    let jobs: Vec<(usize, usize)> = (0..grid.cases.len()).flat_map(|c| (0..ext.len()).map(move |j| (c, j))).collect();
    let samples: Vec<Result<f64, OracleError>> =
        jobs.par_iter().map(|&(c, j)| values_fn(&grid.cases[c], ext[j])).collect();

    let mut failures = Vec::new();
    let mut rows = Vec::with_capacity(n * grid.cases.len());
    let mut sup_curve = vec![vec![0.0f64; n]; k + 1];
    for (c, case) in grid.cases.iter().enumerate() {
        let mut values = Vec::with_capacity(ext.len());
        let mut h = Vec::with_capacity(ext.len());
        for (j, &s) in ext.iter().enumerate() {
            let v = match &samples[c * ext.len() + j] {
                Ok(v) => *v,
                Err(e) => {
                    failures.push(format!("case {} at s = {s:e}: {e}", case.a_index));
                    f64::NAN
                }
            };
            let rem = match sampled {
                Sampled::Value => v - partial_sum(&case.coeffs, s),
                Sampled::Remainder => v,
            };
            values.push(v);
            h.push(rem / s.powi(ell as i32));
        }
        for i in 0..n {
            let at = i + pad;
            let theta: Vec<f64> = (1..=k).map(|r| log_derivative(&h, at, r, d) / case.lambda.powi(r as i32)).collect();
            let mut abs = vec![h[at].abs()];
            abs.extend(theta.iter().map(|t| t.abs()));
            for (r, a) in abs.into_iter().enumerate() {
                let cur = &mut sup_curve[r][i];
                *cur = if a.is_nan() || cur.is_nan() { f64::NAN } else { cur.max(a) };
            }
            rows.push(FlatnessRow {
                s: grid.s[i],
                eps: case.eps,
                lambda: case.lambda,
                a_index: case.a_index,
                value: values[at],
                h: h[at],
                theta,
            });
        }
    }
    rows.sort_by(|a, b| a.s.total_cmp(&b.s));

    let decade = grid.s.iter().take_while(|&&s| s <= 10.0 * grid.s[0] * (1.0 + 1e-12)).count();
    let decay_ok: Vec<bool> = sup_curve
        .iter()
        .map(|sup| {
            sup[0] < tol && (1..decade.max(2).min(n)).all(|i| sup[i - 1] <= sup[i] * (1.0 + 1e-9) + f64::MIN_POSITIVE)
        })
        .collect();
    let slopes = sup_curve.iter().map(|sup| fit_loglog_slope(&grid.s, sup)).collect();
    let verdict = failures.is_empty() && decay_ok.iter().all(|b| *b);
    FlatnessReport { ell, k, tol, sampled, s: grid.s.clone(), rows, sup_curve, decay_ok, slopes, verdict, failures }
}

impl FlatnessReport {
    /// One row per grid point and case; floats in `{:.16e}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> =
            ["s", "eps", "lambda", "a_index", "value", "h"].iter().map(|x| x.to_string()).collect();
        header.extend((1..=self.k).map(|r| format!("theta{r}")));
        out.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                format!("{:.16e}", row.s),
                format!("{:.16e}", row.eps),
                format!("{:.16e}", row.lambda),
                row.a_index.to_string(),
                format!("{:.16e}", row.value),
                format!("{:.16e}", row.h),
            ];
            rec.extend(row.theta.iter().map(|t| format!("{t:.16e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}
