//! Newton diagram of `Q(s, e)` and the hypothesis verdicts.

use serde::Serialize;

use super::FamilyError;
use crate::scalar::Scalar;
use crate::series::{serialize_coeff, BivariatePoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Pass,
    Fail,
    Inconclusive,
}

/// A hypothesis verdict together with whatever witnesses it produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_point: Option<(u32, u32)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_eps_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Verdict {
    fn new(kind: VerdictKind) -> Self {
        Self {
            kind,
            witness_theta: None,
            witness_point: None,
            witness_eps_hat: None,
            min_value: None,
            margin: None,
            grid_size: None,
            note: String::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.kind == VerdictKind::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct NewtonData<T: Scalar> {
    pub q: BivariatePoly<T>,
    pub mu: u32,
    pub nu: u32,
    #[serde(serialize_with = "serialize_coeff")]
    pub chi: T,
    pub support: Vec<(u32, u32)>,
    /// Compact sides of the Newton polygon as endpoint pairs.
    pub sides: Vec<((u32, u32), (u32, u32))>,
    pub h1: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h2: Option<Verdict>,
}

/// Alias kept for callers that only care about the H2 outcome.
pub type H2Check = Result<Verdict, FamilyError>;

/// Support, `(mu, nu, chi)`, the compact sides and the single-side test.
pub fn newton_diagram<T: Scalar>(q: &BivariatePoly<T>) -> Result<NewtonData<T>, FamilyError> {
    let mu = q
        .terms()
        .filter(|((_, j), _)| *j == 0)
        .map(|((i, _), _)| *i)
        .min()
        .ok_or_else(|| FamilyError::InvalidFamily("Q(s, 0) vanishes".into()))?;
    let (nu, chi) = q
        .terms()
        .filter(|((i, _), _)| *i == 0)
        .min_by_key(|((_, j), _)| *j)
        .map(|((_, j), c)| (*j, c.clone()))
        .ok_or(FamilyError::DegenerateQ)?;
    let support: Vec<(u32, u32)> = q.terms().map(|(k, _)| *k).collect();

    // Lower hull from (0, nu) down to (mu, 0).
    let mut sides = Vec::new();
    let mut cur = (0u32, nu);
    while cur.1 > 0 {
        let mut best: Option<((i64, i64), (u32, u32))> = None;
        for &p in support.iter().filter(|p| p.0 > cur.0) {
            let slope = (p.1 as i64 - cur.1 as i64, (p.0 - cur.0) as i64);
            let better = match best {
                None => true,
                Some((s, b)) => {
                    let lhs = slope.0 * s.1;
                    let rhs = s.0 * slope.1;
                    lhs < rhs || (lhs == rhs && p.0 > b.0)
                }
            };
            if better {
                best = Some((slope, p));
            }
        }
        match best {
            Some((s, p)) if s.0 < 0 => {
                sides.push((cur, p));
                cur = p;
            }
            _ => break,
        }
    }

    let violator = support
        .iter()
        .copied()
        .filter(|&(i, j)| (i as u64) * (nu as u64) + (j as u64) * (mu as u64) < (mu as u64) * (nu as u64))
        .min();
    let mut h1 = Verdict::new(if violator.is_none() { VerdictKind::Pass } else { VerdictKind::Fail });
    h1.witness_point = violator;

    Ok(NewtonData { q: q.clone(), mu, nu, chi, support, sides, h1, h0: None, h2: None })
}

/// `(H0)`: `chi > 0` and `Q(0, e) > 0` at every grid value of `e`.
pub fn check_h0<T: Scalar>(nd: &NewtonData<T>, eps_hat_grid: &[f64]) -> Verdict {
    if nd.chi <= T::zero() {
        let mut v = Verdict::new(VerdictKind::Fail);
        v.note = "chi is not positive".into();
        return v;
    }
    let at0 = nd.q.at_s_zero();
    for &e in eps_hat_grid {
        let val: f64 = at0.iter().map(|(j, c)| c.to_f64_lossy() * e.powi(*j as i32)).sum();
        if val <= 0.0 {
            let mut v = Verdict::new(VerdictKind::Fail);
            v.witness_eps_hat = Some(e);
            v.min_value = Some(val);
            return v;
        }
    }
    Verdict::new(VerdictKind::Pass)
}

/// `(H2)` at the default grid size `N = 4096`, refined up to `N = 65536`
/// while the verdict stays inconclusive.
pub fn check_h2<T: Scalar>(nd: &NewtonData<T>) -> H2Check {
    let mut n = 4096;
    loop {
        match check_h2_with(nd, n) {
            Err(FamilyError::Inconclusive { .. }) if n < 65536 => n *= 4,
            other => return other,
        }
    }
}

/// `(H2)` on a uniform grid of `n` intervals over `[0, pi/2]`, certified by
/// the Lipschitz bound `sum |q_ij| (i + j)` of the principal part.
pub fn check_h2_with<T: Scalar>(nd: &NewtonData<T>, n: usize) -> H2Check {
    let (mu, nu) = (nd.mu as u64, nd.nu as u64);
    let principal: Vec<(u32, u32, f64)> =
        nd.q.terms()
            .filter(|((i, j), _)| *i as u64 * nu + *j as u64 * mu == mu * nu)
            .map(|(&(i, j), c)| (i, j, c.to_f64_lossy()))
            .collect();
    let lipschitz: f64 = principal.iter().map(|(i, j, c)| c.abs() * (i + j) as f64).sum();
    let h = std::f64::consts::FRAC_PI_2 / n as f64;
    let g = |theta: f64| -> f64 {
        let (s, c) = theta.sin_cos();
        principal.iter().map(|(i, j, q)| q * s.powi(*i as i32) * c.powi(*j as i32)).sum()
    };
    let (mut min, mut arg) = (f64::INFINITY, 0.0);
    for k in 0..=n {
        let theta = k as f64 * h;
        let v = g(theta);
        if v < min {
            min = v;
            arg = theta;
        }
    }
    let margin = h * lipschitz;
    let kind = if nd.h1.kind != VerdictKind::Pass {
        VerdictKind::Fail
    } else if min > margin {
        VerdictKind::Pass
    } else if min <= 1e-12 * lipschitz {
        VerdictKind::Fail
    } else {
        return Err(FamilyError::Inconclusive { n, min, margin });
    };
    let mut v = Verdict::new(kind);
    v.witness_theta = Some(arg);
    v.min_value = Some(min);
    v.margin = Some(margin);
    v.grid_size = Some(n);
    if nd.h1.kind != VerdictKind::Pass {
        v.note = "requires (H1)".into();
    }
    Ok(v)
}

impl<T: Scalar> NewtonData<T> {
    /// Runs `(H0)` on the grid and `(H2)`; an inconclusive `(H2)` is recorded
    /// as such rather than returned as an error.
    pub fn with_checks(mut self, eps_hat_grid: &[f64]) -> Self {
        self.h0 = Some(check_h0(&self, eps_hat_grid));
        self.h2 = Some(match check_h2(&self) {
            Ok(v) => v,
            Err(FamilyError::Inconclusive { n, min, margin }) => {
                let mut v = Verdict::new(VerdictKind::Inconclusive);
                v.min_value = Some(min);
                v.margin = Some(margin);
                v.grid_size = Some(n);
                v
            }
            Err(_) => Verdict::new(VerdictKind::Fail),
        });
        self
    }

    /// All three hypotheses pass.
    pub fn all_pass(&self) -> bool {
        self.h1.passed()
            && self.h0.as_ref().is_some_and(Verdict::passed)
            && self.h2.as_ref().is_some_and(Verdict::passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};

    fn q(terms: &[((u32, u32), i64)]) -> BivariatePoly<Rational> {
        BivariatePoly::from_terms(terms.iter().map(|&(k, c)| (k, rat(c, 1))))
    }

    fn grid() -> Vec<f64> {
        vec![1e-8, 1e-6, 1e-4, 1e-2]
    }

    #[test]
    fn simple_node() {
        let nd = newton_diagram(&q(&[((1, 0), 1), ((0, 1), 1)])).unwrap().with_checks(&grid());
        assert_eq!((nd.mu, nd.nu), (1, 1));
        assert_eq!(nd.chi, rat(1, 1));
        assert!(nd.all_pass());
        assert_eq!(nd.sides, vec![((0, 1), (1, 0))]);
    }

    #[test]
    fn counterexample_fails_h2_at_quarter_pi() {
        let nd =
            newton_diagram(&q(&[((2, 0), 1), ((1, 1), -2), ((0, 2), 1), ((0, 4), 1)])).unwrap().with_checks(&grid());
        assert_eq!((nd.mu, nd.nu), (2, 2));
        assert!(nd.h1.passed());
        assert!(nd.h0.as_ref().unwrap().passed());
        let h2 = nd.h2.as_ref().unwrap();
        assert_eq!(h2.kind, VerdictKind::Fail);
        assert!((h2.witness_theta.unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn sum_of_squares_passes_h2() {
        let nd = newton_diagram(&q(&[((2, 0), 1), ((0, 2), 1)])).unwrap();
        assert!(check_h2(&nd).unwrap().passed());
    }

    #[test]
    fn degenerate_q() {
        assert_eq!(newton_diagram(&q(&[((2, 0), 1), ((1, 1), 1)])), Err(FamilyError::DegenerateQ));
    }

    #[test]
    fn negative_chi_fails_h0() {
        let nd = newton_diagram(&q(&[((1, 0), 1), ((0, 2), -1)])).unwrap();
        assert_eq!(check_h0(&nd, &grid()).kind, VerdictKind::Fail);
    }

    #[test]
    fn two_sides_fail_h1() {
        // s^3 + s e + e^3: (1,1) lies below the segment (3,0)-(0,3)
        let nd = newton_diagram(&q(&[((3, 0), 1), ((1, 1), 1), ((0, 3), 1)])).unwrap();
        assert_eq!(nd.h1.kind, VerdictKind::Fail);
        assert_eq!(nd.h1.witness_point, Some((1, 1)));
        assert_eq!(nd.sides.len(), 2);
    }

    #[test]
    fn inconclusive_when_margin_is_coarse() {
        // (s - e)^2 + e^2/100 is positive but close to zero: a coarse grid cannot certify it
        let mut p = q(&[((2, 0), 1), ((1, 1), -2), ((0, 2), 1)]);
        p.add_term(0, 2, rat(1, 100));
        let nd = newton_diagram(&p).unwrap();
        assert!(matches!(check_h2_with(&nd, 16), Err(FamilyError::Inconclusive { .. })));
        assert!(check_h2_with(&nd, 1 << 16).unwrap().passed());
    }
}
