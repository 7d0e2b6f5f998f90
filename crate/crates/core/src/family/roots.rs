//! Univariate polynomial helpers over exact rationals: Sturm counting,
//! largest real root to the last ulp, and float eigenvalue roots.

use nalgebra::DMatrix;
use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::scalar::{rational_to_f64, Rational};

/// Ascending coefficients, trailing zeros trimmed.
pub type RatPoly = Vec<Rational>;

pub fn trim(p: &mut RatPoly) {
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

pub fn eval(p: &[Rational], x: &Rational) -> Rational {
    p.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
}

pub fn derivative(p: &[Rational]) -> RatPoly {
    if p.len() <= 1 {
        return vec![Rational::zero()];
    }
    p.iter().enumerate().skip(1).map(|(j, c)| c * Rational::from_integer(j.into())).collect()
}

fn degree(p: &[Rational]) -> Option<usize> {
    p.iter().rposition(|c| !c.is_zero())
}

/// Remainder of `a / b`.
pub fn rem(a: &[Rational], b: &[Rational]) -> RatPoly {
    let db = degree(b).expect("division by zero polynomial");
    let mut r: RatPoly = a.to_vec();
    while let Some(dr) = degree(&r) {
        if dr < db {
            break;
        }
        let f = &r[dr] / &b[db];
        for j in 0..=db {
            let t = &f * &b[j];
            r[dr - db + j] -= t;
        }
        r.truncate(dr);
        if r.is_empty() {
            r.push(Rational::zero());
        }
    }
    trim(&mut r);
    r
}

/// Exact quotient `a / b` (remainder discarded).
pub fn quo(a: &[Rational], b: &[Rational]) -> RatPoly {
    let db = degree(b).expect("division by zero polynomial");
    let mut r: RatPoly = a.to_vec();
    let da = match degree(&r) {
        Some(d) if d >= db => d,
        _ => return vec![Rational::zero()],
    };
    let mut q = vec![Rational::zero(); da - db + 1];
    for k in (0..=da - db).rev() {
        let f = &r[k + db] / &b[db];
        for j in 0..=db {
            let t = &f * &b[j];
            r[k + j] -= t;
        }
        q[k] = f;
    }
    trim(&mut q);
    q
}

pub fn gcd(a: &[Rational], b: &[Rational]) -> RatPoly {
    let (mut x, mut y) = (a.to_vec(), b.to_vec());
    trim(&mut x);
    trim(&mut y);
    while degree(&y).is_some() {
        let r = rem(&x, &y);
        x = y;
        y = r;
    }
    if let Some(d) = degree(&x) {
        let lead = x[d].clone();
        for c in x.iter_mut() {
            *c /= &lead;
        }
    }
    x
}

pub fn square_free(p: &[Rational]) -> RatPoly {
    let g = gcd(p, &derivative(p));
    if degree(&g).unwrap_or(0) == 0 {
        let mut q = p.to_vec();
        trim(&mut q);
        return q;
    }
    quo(p, &g)
}

/// Sturm chain of a square-free polynomial.
pub fn sturm_chain(p: &[Rational]) -> Vec<RatPoly> {
    let mut chain = vec![p.to_vec(), derivative(p)];
    loop {
        let n = chain.len();
        if degree(&chain[n - 1]).is_none_or(|d| d == 0) {
            break;
        }
        let r = rem(&chain[n - 2], &chain[n - 1]);
        if degree(&r).is_none() {
            break;
        }
        chain.push(r.into_iter().map(|c| -c).collect());
    }
    chain
}

fn sign_changes(values: impl Iterator<Item = i8>) -> usize {
    let mut last = 0i8;
    let mut n = 0;
    for v in values {
        if v == 0 {
            continue;
        }
        if last != 0 && v != last {
            n += 1;
        }
        last = v;
    }
    n
}

fn sign(x: &Rational) -> i8 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

/// Number of distinct real roots strictly greater than `x`.
pub fn roots_above(chain: &[RatPoly], x: &Rational) -> usize {
    let at_x = sign_changes(chain.iter().map(|p| sign(&eval(p, x))));
    let at_inf = sign_changes(chain.iter().map(|p| degree(p).map_or(0, |d| sign(&p[d]))));
    at_x.saturating_sub(at_inf)
}

/// A Sturm chain with denominators cleared, evaluated at doubles using
/// integer arithmetic only.
struct IntChain {
    polys: Vec<Vec<BigInt>>,
    at_inf: usize,
}

impl IntChain {
    fn new(chain: &[RatPoly]) -> Self {
        let polys: Vec<Vec<BigInt>> = chain
            .iter()
            .map(|p| {
                let l = p.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
                p.iter().map(|c| (c * Rational::from_integer(l.clone())).to_integer()).collect()
            })
            .collect();
        let at_inf =
            sign_changes(polys.iter().map(|p| p.iter().rposition(|c| !c.is_zero()).map_or(0, |d| int_sign(&p[d]))));
        Self { polys, at_inf }
    }

    fn roots_above(&self, x: f64) -> usize {
        let (m, k) = dyadic(x);
        let at_x = sign_changes(self.polys.iter().map(|p| int_sign(&eval_dyadic(p, &m, k))));
        at_x.saturating_sub(self.at_inf)
    }
}

fn int_sign(x: &BigInt) -> i8 {
    match x.sign() {
        Sign::Plus => 1,
        Sign::Minus => -1,
        Sign::NoSign => 0,
    }
}

/// `x = m / 2^k` with `k >= 0`.
fn dyadic(x: f64) -> (BigInt, u32) {
    if x == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let m = BigInt::from(mant) * if x < 0.0 { -1 } else { 1 };
    if e >= 0 {
        (m << e as usize, 0)
    } else {
        (m, (-e) as u32)
    }
}

/// `2^{k d} p(m / 2^k)`, which has the sign of `p(m / 2^k)`.
fn eval_dyadic(p: &[BigInt], m: &BigInt, k: u32) -> BigInt {
    let d = p.len() - 1;
    let mut acc = p[d].clone();
    for i in (0..d).rev() {
        acc = acc * m + (&p[i] << (k as usize * (d - i)));
    }
    acc
}

fn cauchy_bound(p: &[Rational]) -> f64 {
    let d = match degree(p) {
        Some(d) if d > 0 => d,
        _ => return 1.0,
    };
    let lead = p[d].abs();
    let m = p[..d].iter().map(|c| rational_to_f64(&(c.abs() / &lead))).fold(0.0, f64::max);
    (1.0 + m).ceil() + 1.0
}

/// Order-preserving map from finite doubles to integers.
fn key(x: f64) -> i64 {
    let b = x.to_bits() as i64;
    b ^ ((((b >> 63) as u64) >> 1) as i64)
}

fn unkey(k: i64) -> f64 {
    f64::from_bits((k ^ ((((k >> 63) as u64) >> 1) as i64)) as u64)
}

/// Largest real root of `p`, located between adjacent doubles by exact
/// Sturm counting. `None` when `p` has no real root.
pub fn largest_real_root(p: &[Rational]) -> Option<f64> {
    let mut q = p.to_vec();
    trim(&mut q);
    let d = degree(&q)?;
    if d == 0 {
        return None;
    }
    let sf = square_free(&q);
    let chain = sturm_chain(&sf);
    let b = cauchy_bound(&sf);
    let ic = IntChain::new(&chain);
    let count = |x: f64| ic.roots_above(x);
    if count(-b) == 0 {
        return None;
    }
    let (mut lo, mut hi) = (key(-b), key(b));
    while (hi as i128) - (lo as i128) > 1 {
        let mid = ((lo as i128 + hi as i128) >> 1) as i64;
        if count(unkey(mid)) >= 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The root lies in (lo, hi]; prefer an exact hit.
    let h = unkey(hi);
    let l = unkey(lo);
    let ph = eval(&sf, &Rational::from_float(h).expect("finite"));
    if ph.is_zero() {
        return Some(h);
    }
    let pl = eval(&sf, &Rational::from_float(l).expect("finite"));
    Some(if pl.abs() < ph.abs() { l } else { h })
}

/// Number of distinct real roots of `p`.
pub fn count_real_roots(p: &[Rational]) -> usize {
    let mut q = p.to_vec();
    trim(&mut q);
    if degree(&q).is_none_or(|d| d == 0) {
        return 0;
    }
    let sf = square_free(&q);
    let chain = sturm_chain(&sf);
    let b = cauchy_bound(&sf);
    roots_above(&chain, &Rational::from_float(-b).expect("finite"))
}

/// All complex roots of a float polynomial (ascending coefficients) as
/// `(re, im)` pairs, from the eigenvalues of the companion matrix.
pub fn complex_roots(p: &[f64]) -> Vec<(f64, f64)> {
    let d = match p.iter().rposition(|c| *c != 0.0) {
        Some(d) => d,
        None => return Vec::new(),
    };
    let zeros = p.iter().take_while(|c| **c == 0.0).count();
    let mut out: Vec<(f64, f64)> = vec![(0.0, 0.0); zeros];
    let core = &p[zeros..=d];
    let n = core.len() - 1;
    if n == 0 {
        return out;
    }
    if n == 1 {
        out.push((-core[0] / core[1], 0.0));
        return out;
    }
    let lead = core[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -core[i] / lead;
    }
    out.extend(m.complex_eigenvalues().iter().map(|z| (z.re, z.im)));
    out
}

/// Real roots of a float polynomial, with near-real eigenvalues accepted,
/// polished by Newton steps and de-duplicated.
pub fn real_roots_f64(p: &[f64]) -> Vec<f64> {
    let eval_f = |x: f64| p.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let deriv: Vec<f64> = p.iter().enumerate().skip(1).map(|(j, c)| c * j as f64).collect();
    let eval_d = |x: f64| deriv.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let mut roots: Vec<f64> = Vec::new();
    for (re, im) in complex_roots(p) {
        if im.abs() > 1e-6 * re.abs().max(1.0) {
            continue;
        }
        let mut x = re;
        for _ in 0..3 {
            let d = eval_d(x);
            if d == 0.0 {
                break;
            }
            let step = eval_f(x) / d;
            if !step.is_finite() || step.abs() > 1e-6 * x.abs().max(1.0) {
                break;
            }
            x -= step;
        }
        if !roots.iter().any(|r| (r - x).abs() <= 1e-7 * x.abs().max(1e-300).max(r.abs())) {
            roots.push(x);
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn p(v: &[i64]) -> RatPoly {
        v.iter().map(|&c| rat(c, 1)).collect()
    }

    #[test]
    fn largest_root_of_simple_polynomials() {
        // x^2 - 2
        let r = largest_real_root(&p(&[-2, 0, 1])).unwrap();
        assert!((r - 2f64.sqrt()).abs() <= f64::EPSILON * 2.0);
        // x (x^2 + 1): only the root at zero
        assert_eq!(largest_real_root(&p(&[0, 1, 0, 1])), Some(0.0));
        // x^2 + 1: none
        assert_eq!(largest_real_root(&p(&[1, 0, 1])), None);
    }

    #[test]
    fn tiny_roots_are_resolved() {
        // x (x - 1e-20)
        let e = rat(1, 1) / Rational::from_integer(num_traits::pow(num_bigint::BigInt::from(10), 20));
        let poly = vec![Rational::zero(), -e, rat(1, 1)];
        let r = largest_real_root(&poly).unwrap();
        assert!((r - 1e-20).abs() <= 1e-35);
    }

    #[test]
    fn repeated_roots_are_counted_once() {
        // (x - 1)^2 (x + 2)
        let poly = p(&[2, -3, 0, 1]);
        assert_eq!(count_real_roots(&poly), 2);
        assert_eq!(largest_real_root(&poly), Some(1.0));
    }

    #[test]
    fn float_real_roots() {
        let r = real_roots_f64(&[0.0, -1.0, 0.0, 1.0]);
        assert_eq!(r.len(), 3);
        assert!((r[2] - 1.0).abs() < 1e-14);
        assert!(real_roots_f64(&[1.0, 0.0, 1.0]).is_empty());
    }
}
