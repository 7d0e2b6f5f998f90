//! Newton-Puiseux extraction of the biggest real root branch.
//!
//! The iteration runs over exact rationals first. An edge polynomial with an
//! irrational real root sends the whole extraction to doubles, and a branch
//! that still fails the numeric cross-check falls back to a least-squares fit.

use nalgebra::{DMatrix, DVector};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{roots, FamilyError, PolynomialFamily};
use crate::scalar::{rat, rational_to_f64, rationalize, Rational, Scalar};
use crate::series::{BivariatePoly, TruncatedSeries};

/// Which sign of `eps` a branch covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn of(eps: f64) -> Side {
        if eps < 0.0 {
            Side::Minus
        } else {
            Side::Plus
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Side::Plus => 1,
            Side::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMethod {
    Exact,
    Float,
    NumericFit,
}

/// `theta_eps = sigma(|eps|^{1/rho})` on one side of `eps = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PuiseuxBranch {
    pub rho: u32,
    pub sigma: TruncatedSeries<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_exact: Option<TruncatedSeries<Rational>>,
    pub sign: Side,
    /// `sigma` is an exact root, not a truncation.
    pub terminating: bool,
    pub method: BranchMethod,
}

impl PuiseuxBranch {
    /// The branch `theta = 0`.
    pub fn zero(sign: Side) -> Self {
        Self {
            rho: 1,
            sigma: TruncatedSeries::zero(12),
            sigma_exact: Some(TruncatedSeries::zero(12)),
            sign,
            terminating: true,
            method: BranchMethod::Exact,
        }
    }

    pub fn theta(&self, eps_hat: f64) -> f64 {
        self.sigma.eval_f64(eps_hat)
    }

    pub fn theta_exact(&self, eps_hat: &Rational) -> Option<Rational> {
        self.sigma_exact.as_ref().map(|s| s.eval(eps_hat))
    }

    pub fn eps_hat(&self, eps: f64) -> f64 {
        eps.abs().powf(1.0 / self.rho as f64)
    }

    pub fn eps_of(&self, eps_hat: f64) -> f64 {
        self.sign.sign() as f64 * eps_hat.powi(self.rho as i32)
    }

    pub fn is_exact(&self) -> bool {
        self.sigma_exact.is_some()
    }
}

/// `{1, 3} x 10^-k` from `1e-8` to `1e-2`, ascending.
pub fn default_eps_grid() -> Vec<Rational> {
    let mut g = Vec::new();
    for k in (2..=8).rev() {
        let p = Rational::from_integer(num_traits::pow(num_bigint::BigInt::from(10), k));
        g.push(rat(1, 1) / &p);
        if k > 2 {
            g.push(rat(3, 1) / &p);
        }
    }
    g.sort();
    g
}

#[derive(Debug)]
struct NeedsFloat;

#[derive(Debug, Clone)]
struct RawBranch<T> {
    terms: Vec<(T, Rational)>,
    terminating: bool,
}

struct Stage<T> {
    poly: BivariatePoly<T>,
    terms: Vec<(T, Rational)>,
    base: Rational,
    r: u64,
    depth: usize,
}

const MAX_DEPTH: usize = 40;

fn clean<T: Scalar>(p: &BivariatePoly<T>) -> BivariatePoly<T> {
    if T::EXACT {
        p.clone()
    } else {
        p.cleaned(1e-11)
    }
}

/// Nonzero real roots of `E(a) = sum e_k a^k`.
fn edge_roots<T: Scalar>(e: &[T]) -> Result<Vec<T>, NeedsFloat> {
    let f: Vec<f64> = e.iter().map(|c| c.to_f64_lossy()).collect();
    let candidates = roots::real_roots_f64(&f);
    let mut out: Vec<T> = Vec::new();
    for x in candidates {
        if x == 0.0 {
            continue;
        }
        if T::EXACT {
            let r = rationalize(x, 1_000_000, 1e-9).ok_or(NeedsFloat)?;
            let t = T::from_rational(&r);
            let val = e.iter().rev().fold(T::zero(), |acc, c| acc * t.clone() + c.clone());
            if !val.is_zero() {
                return Err(NeedsFloat);
            }
            if !out.contains(&t) {
                out.push(t);
            }
        } else {
            out.push(T::from_f64_exact(x).expect("finite"));
        }
    }
    Ok(out)
}

fn binomial(n: u32, k: u32) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

fn explore<T: Scalar>(st: Stage<T>, out: &mut Vec<RawBranch<T>>) -> Result<(), NeedsFloat> {
    let mut poly = clean(&st.poly);
    let kmin = poly.terms().map(|((k, _), _)| *k).min().unwrap_or(0);
    if kmin > 0 {
        // x_i = 0 is an exact root; the remaining roots come from P / x_i^kmin.
        out.push(RawBranch { terms: st.terms.clone(), terminating: true });
        poly = BivariatePoly::from_terms(poly.terms().map(|(&(k, m), c)| ((k - kmin, m), c.clone())));
    }
    let deep = st.terms.first().is_some_and(|(_, e0)| st.base.clone() - e0 >= rat(6, 1));
    if st.depth >= MAX_DEPTH || deep {
        out.push(RawBranch { terms: st.terms, terminating: false });
        return Ok(());
    }
    // Lowest z-exponent for every x-exponent.
    let mut pts: Vec<(u32, u32)> = Vec::new();
    for (&(k, m), _) in poly.terms() {
        match pts.iter_mut().find(|p| p.0 == k) {
            Some(p) => p.1 = p.1.min(m),
            None => pts.push((k, m)),
        }
    }
    pts.sort();
    let mut cur = pts[0];
    loop {
        let mut best: Option<(Rational, (u32, u32))> = None;
        for &p in pts.iter().filter(|p| p.0 > cur.0) {
            let slope = Rational::new((p.1 as i64 - cur.1 as i64).into(), ((p.0 - cur.0) as i64).into());
            let better = match &best {
                None => true,
                Some((s, q)) => slope < *s || (slope == *s && p.0 > q.0),
            };
            if better {
                best = Some((slope, p));
            }
        }
        let (slope, next) = match best {
            Some((s, n)) if s.is_negative() => (s, n),
            _ => break,
        };
        let gamma = -slope;
        let p = gamma.numer().to_u64().expect("small exponent");
        let q = gamma.denom().to_u64().expect("small exponent");
        let level = p * cur.0 as u64 + q * cur.1 as u64;
        let mut edge = vec![T::zero(); (next.0 - cur.0) as usize + 1];
        for (&(k, m), c) in poly.terms() {
            if p * k as u64 + q * m as u64 == level {
                edge[(k - cur.0) as usize] = c.clone();
            }
        }
        for a in edge_roots(&edge)? {
            let mut np = BivariatePoly::<T>::new();
            for (&(k, m), c) in poly.terms() {
                let zexp = (p * k as u64 + q * m as u64 - level) as u32;
                for i in 0..=k {
                    let coef = c.clone() * T::from_int(binomial(k, i)) * Scalar::powi(&a, k - i);
                    np.add_term(i, zexp, coef);
                }
            }
            let exponent = st.base.clone() + Rational::new((p as i64).into(), ((q * st.r) as i64).into());
            let mut terms = st.terms.clone();
            terms.push((a.clone(), exponent.clone()));
            explore(Stage { poly: np, terms, base: exponent, r: st.r * q, depth: st.depth + 1 }, out)?;
        }
        cur = next;
    }
    Ok(())
}

fn raw_branches<T: Scalar>(family: &PolynomialFamily, sign: Side) -> Result<Vec<RawBranch<T>>, NeedsFloat> {
    let s = T::from_int(sign.sign());
    let poly = BivariatePoly::from_terms(
        family.terms().map(|(&(k, m), c)| ((k, m), T::from_rational(c) * Scalar::powi(&s, m))),
    );
    let mut out = Vec::new();
    explore(Stage { poly, terms: Vec::new(), base: Rational::zero(), r: 1, depth: 0 }, &mut out)?;
    Ok(out)
}

fn to_branch<T: Scalar>(raw: &RawBranch<T>, sign: Side, method: BranchMethod) -> PuiseuxBranch {
    let rho = raw
        .terms
        .iter()
        .fold(num_bigint::BigInt::one(), |acc, (_, e)| acc.lcm(e.denom()))
        .to_u32()
        .expect("small ramification");
    let idx: Vec<usize> = raw
        .terms
        .iter()
        .map(|(_, e)| (e * Rational::from_integer(rho.into())).to_integer().to_usize().expect("index"))
        .collect();
    let order = idx.iter().copied().max().unwrap_or(0).max(12).max(5 * rho as usize + 1);
    let mut f = vec![0.0; order + 1];
    let mut x = vec![Rational::zero(); order + 1];
    for ((c, _), &n) in raw.terms.iter().zip(&idx) {
        f[n] += c.to_f64_lossy();
        if T::EXACT {
            x[n] += c.to_rational().expect("finite coefficient");
        }
    }
    PuiseuxBranch {
        rho,
        sigma: TruncatedSeries::new(f),
        sigma_exact: T::EXACT.then(|| TruncatedSeries::new(x)),
        sign,
        terminating: raw.terminating,
        method,
    }
}

struct Tracked {
    e: Vec<f64>,
    roots: Vec<f64>,
}

fn track(family: &PolynomialFamily, sign: Side) -> Result<Tracked, FamilyError> {
    let mut e = Vec::new();
    let mut roots = Vec::new();
    for g in default_eps_grid() {
        let eps = if sign == Side::Minus { -g.clone() } else { g.clone() };
        let r = family.largest_real_root(&eps).ok_or(FamilyError::NoRealRoot { eps: rational_to_f64(&eps) })?;
        e.push(rational_to_f64(&g));
        roots.push(r);
    }
    Ok(Tracked { e, roots })
}

fn max_rel_err(b: &PuiseuxBranch, t: &Tracked) -> f64 {
    t.e.iter()
        .zip(&t.roots)
        .map(|(&e, &r)| {
            let v = b.theta(b.eps_hat(e));
            (v - r).abs() / r.abs().max(1e-300)
        })
        .fold(0.0, f64::max)
}

/// Descending lexicographic order on the coefficient sequence.
fn cmp_branches(a: &PuiseuxBranch, b: &PuiseuxBranch) -> std::cmp::Ordering {
    let n = a.sigma.order().max(b.sigma.order());
    for j in 0..=n {
        // Compare at a common ramification: coefficient of e^{j / rho}.
        let x = coeff_at(a, j, b.rho);
        let y = coeff_at(b, j, a.rho);
        match y.partial_cmp(&x) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn coeff_at(a: &PuiseuxBranch, j: usize, other_rho: u32) -> f64 {
    // Index j in units of e^{1/(rho_a * rho_b)}.
    let scale = other_rho as usize;
    if j.is_multiple_of(scale) {
        a.sigma.coeff(j / scale)
    } else {
        0.0
    }
}

fn select(cands: Vec<PuiseuxBranch>, t: &Tracked) -> Result<PuiseuxBranch, f64> {
    let mut best_err = f64::INFINITY;
    let mut matched: Vec<PuiseuxBranch> = Vec::new();
    for c in cands {
        let err = max_rel_err(&c, t);
        best_err = best_err.min(err);
        if err <= 1e-9 && !matched.contains(&c) {
            matched.push(c);
        }
    }
    if matched.is_empty() {
        return Err(best_err);
    }
    matched.sort_by(cmp_branches);
    Ok(matched.swap_remove(0))
}

fn ambiguous(cands: &[PuiseuxBranch], chosen: &PuiseuxBranch, t: &Tracked) -> bool {
    cands.iter().filter(|c| max_rel_err(c, t) <= 1e-9).any(|c| {
        c != chosen && cmp_branches(c, chosen) == std::cmp::Ordering::Equal && !(c.terminating && chosen.terminating)
    })
}

fn numeric_fit(t: &Tracked, sign: Side) -> Result<PuiseuxBranch, FamilyError> {
    if t.roots.iter().all(|r| r.abs() <= 1e-300) {
        let mut b = PuiseuxBranch::zero(sign);
        b.method = BranchMethod::NumericFit;
        return Ok(b);
    }
    let pts: Vec<(f64, f64)> =
        t.e.iter().zip(&t.roots).filter(|(_, r)| r.abs() > 1e-300).map(|(e, r)| (e.ln(), r.abs().ln())).collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let gamma = rationalize(num / den, 12, 0.05).ok_or(FamilyError::BranchMismatch { max_rel_err: f64::INFINITY })?;
    let rho = gamma.denom().to_u32().unwrap_or(1).max(1);
    let n0 = gamma.numer().to_usize().unwrap_or(0);
    let unknowns = 6usize;
    let rows = t.e.len();
    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let mut b = DVector::<f64>::zeros(rows);
    for (i, (&e, &r)) in t.e.iter().zip(&t.roots).enumerate() {
        let z = e.powf(1.0 / rho as f64);
        // Scale each row by the leading magnitude for relative accuracy.
        let w = z.powi(n0 as i32).max(1e-300);
        for j in 0..unknowns {
            a[(i, j)] = z.powi((n0 + j) as i32) / w;
        }
        b[i] = r / w;
    }
    let sol =
        a.svd(true, true).solve(&b, 1e-14).map_err(|_| FamilyError::BranchMismatch { max_rel_err: f64::INFINITY })?;
    let order = (n0 + unknowns).max(12).max(5 * rho as usize + 1);
    let mut f = vec![0.0; order + 1];
    for j in 0..unknowns {
        f[n0 + j] = sol[j];
    }
    let branch = PuiseuxBranch {
        rho,
        sigma: TruncatedSeries::new(f),
        sigma_exact: None,
        sign,
        terminating: false,
        method: BranchMethod::NumericFit,
    };
    let err = max_rel_err(&branch, t);
    if err > 1e-9 {
        return Err(FamilyError::BranchMismatch { max_rel_err: err });
    }
    Ok(branch)
}

/// Puiseux branch `(rho, sigma)` of the largest real root of `P(.; eps)` for
/// small `eps` of the given sign, cross-checked against exact Sturm tracking
/// on the default grid to relative accuracy `1e-9`.
pub fn biggest_real_root_branch(family: &PolynomialFamily, sign: Side) -> Result<PuiseuxBranch, FamilyError> {
    let tracked = track(family, sign)?;
    let mut worst = f64::INFINITY;
    if let Ok(raw) = raw_branches::<Rational>(family, sign) {
        let cands: Vec<_> = raw.iter().map(|r| to_branch(r, sign, BranchMethod::Exact)).collect();
        match select(cands.clone(), &tracked) {
            Ok(b) => {
                if ambiguous(&cands, &b, &tracked) {
                    return Err(FamilyError::BranchAmbiguous);
                }
                return Ok(b);
            }
            Err(e) => worst = worst.min(e),
        }
    }
    if let Ok(raw) = raw_branches::<f64>(family, sign) {
        let cands: Vec<_> = raw.iter().map(|r| to_branch(r, sign, BranchMethod::Float)).collect();
        match select(cands.clone(), &tracked) {
            Ok(b) => {
                if ambiguous(&cands, &b, &tracked) {
                    return Err(FamilyError::BranchAmbiguous);
                }
                return Ok(b);
            }
            Err(e) => worst = worst.min(e),
        }
    }
    numeric_fit(&tracked, sign).map_err(|e| match e {
        FamilyError::BranchMismatch { max_rel_err } => {
            FamilyError::BranchMismatch { max_rel_err: max_rel_err.min(worst) }
        }
        other => other,
    })
}

/// `Q(s, e) = P(s + sigma(e); sign e^rho) / s` as a sparse polynomial.
///
/// For a truncated branch, powers of `e` beyond the order of `sigma` are
/// dropped since they are not determined by the branch.
pub fn compute_q<T: Scalar>(
    family: &PolynomialFamily,
    branch: &PuiseuxBranch,
) -> Result<BivariatePoly<T>, FamilyError> {
    let sigma: Vec<T> = if T::EXACT {
        let s = branch.sigma_exact.as_ref().ok_or(FamilyError::InexactBranch)?;
        s.coeffs().iter().map(T::from_rational).collect()
    } else {
        branch.sigma.coeffs().iter().map(|c| T::from_f64_exact(*c).expect("finite")).collect()
    };
    let max_j = (!branch.terminating).then(|| sigma.len() as u32 - 1);
    let mut shift = BivariatePoly::from_terms(sigma.iter().enumerate().map(|(n, c)| ((0, n as u32), c.clone())));
    shift.add_term(1, 0, T::one());
    let sign = T::from_int(branch.sign.sign());
    let mut powers = vec![BivariatePoly::from_terms([((0, 0), T::one())])];
    let mut full = BivariatePoly::<T>::new();
    for (&(k, m), c) in family.terms() {
        while powers.len() <= k as usize {
            let mut next = powers.last().expect("nonempty").mul(&shift);
            if let Some(j) = max_j {
                next = next.truncate_e(j);
            }
            powers.push(next);
        }
        let coef = T::from_rational(c) * Scalar::powi(&sign, m);
        let scaled = BivariatePoly::from_terms(
            powers[k as usize].terms().map(|(&(i, j), v)| ((i, j + branch.rho * m), v.clone() * coef.clone())),
        );
        full = full.add(&scaled);
    }
    if let Some(j) = max_j {
        full = full.truncate_e(j);
    }
    let scale = full.terms().map(|(_, c)| c.to_f64_lossy().abs()).fold(0.0, f64::max);
    let residual = full.terms().filter(|((i, _), _)| *i == 0).map(|(_, c)| c.to_f64_lossy().abs()).fold(0.0, f64::max);
    let divisible = if T::EXACT {
        residual == 0.0 && full.terms().all(|((i, _), c)| *i > 0 || c.is_zero())
    } else {
        residual <= 1e-9 * scale.max(1.0)
    };
    if !divisible {
        return Err(FamilyError::NotDivisible { residual });
    }
    let q = BivariatePoly::from_terms(
        full.terms().filter(|((i, _), _)| *i > 0).map(|(&(i, j), c)| ((i - 1, j), c.clone())),
    );
    Ok(if T::EXACT { q } else { q.cleaned(1e-14) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_thirteen_points() {
        let g = default_eps_grid();
        assert_eq!(g.len(), 13);
        assert_eq!(g[0], rat(1, 100_000_000));
        assert_eq!(g[12], rat(1, 100));
    }

    #[test]
    fn equi_branches() {
        for mu in 1..=3 {
            let f = PolynomialFamily::equi(mu);
            let b = biggest_real_root_branch(&f, Side::Plus).unwrap();
            assert_eq!(b.rho, mu);
            assert_eq!(b.sigma_exact.as_ref().unwrap().coeff(1), rat(1, 1));
            assert!(b.sigma.coeffs().iter().enumerate().all(|(j, c)| j == 1 || *c == 0.0));
            let m = biggest_real_root_branch(&f, Side::Minus).unwrap();
            assert_eq!(m.rho, 1);
            assert!(m.sigma.is_zero());
        }
    }

    #[test]
    fn counterexample_branch_is_zero() {
        let f = PolynomialFamily::counterexample();
        for side in [Side::Plus, Side::Minus] {
            let b = biggest_real_root_branch(&f, side).unwrap();
            assert_eq!(b.rho, 1);
            assert!(b.sigma.is_zero());
            assert!(b.terminating);
        }
    }

    #[test]
    fn irrational_leading_coefficient_uses_floats() {
        // x (x^2 - 2 eps): theta = sqrt(2) eps^{1/2}
        let f = PolynomialFamily::new(2, [((3, 0), rat(1, 1)), ((1, 1), rat(-2, 1))]).unwrap();
        let b = biggest_real_root_branch(&f, Side::Plus).unwrap();
        assert_eq!(b.method, BranchMethod::Float);
        assert_eq!(b.rho, 2);
        assert!((b.sigma.coeff(1) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn non_terminating_branch() {
        // x (x - eps - eps x): theta = eps / (1 - eps)
        let f = PolynomialFamily::new(1, [((2, 0), rat(1, 1)), ((1, 1), rat(-1, 1)), ((2, 1), rat(-1, 1))]).unwrap();
        let b = biggest_real_root_branch(&f, Side::Plus).unwrap();
        assert_eq!(b.method, BranchMethod::Exact);
        assert_eq!(b.rho, 1);
        assert!(!b.terminating);
        let s = b.sigma_exact.as_ref().unwrap();
        assert!((1..=6).all(|j| s.coeff(j) == rat(1, 1)));
    }

    #[test]
    fn q_examples() {
        let f = PolynomialFamily::equi(1);
        let b = biggest_real_root_branch(&f, Side::Plus).unwrap();
        let q = compute_q::<Rational>(&f, &b).unwrap();
        assert_eq!(q, BivariatePoly::from_terms([((1, 0), rat(1, 1)), ((0, 1), rat(1, 1))]));
        let f = PolynomialFamily::counterexample();
        let b = biggest_real_root_branch(&f, Side::Plus).unwrap();
        let q = compute_q::<Rational>(&f, &b).unwrap();
        let expect = BivariatePoly::from_terms([
            ((2, 0), rat(1, 1)),
            ((1, 1), rat(-2, 1)),
            ((0, 2), rat(1, 1)),
            ((0, 4), rat(1, 1)),
        ]);
        assert_eq!(q, expect);
        let qf = compute_q::<f64>(&f, &b).unwrap();
        assert_eq!(qf.get(1, 1), -2.0);
    }

    #[test]
    fn q_at_zero_is_s_pow_mu() {
        for f in [PolynomialFamily::equi(1), PolynomialFamily::equi(2), PolynomialFamily::counterexample()] {
            for side in [Side::Plus, Side::Minus] {
                let b = biggest_real_root_branch(&f, side).unwrap();
                let q = compute_q::<Rational>(&f, &b).unwrap();
                let at0 = q.restrict_e(&Rational::zero(), 6);
                let mu = f.mu() as usize;
                for j in 0..=6 {
                    assert_eq!(at0.coeff(j), if j == mu { rat(1, 1) } else { Rational::zero() });
                }
            }
        }
    }

    #[test]
    fn wrong_branch_is_not_divisible() {
        let f = PolynomialFamily::equi(1);
        let mut b = PuiseuxBranch::zero(Side::Plus);
        b.sigma_exact = Some(TruncatedSeries::new(vec![rat(0, 1), rat(2, 1)]));
        b.sigma = TruncatedSeries::new(vec![0.0, 2.0]);
        assert!(matches!(compute_q::<Rational>(&f, &b), Err(FamilyError::NotDivisible { .. })));
    }
}
