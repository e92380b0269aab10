//! Odd Chebyshev approximation of 1/z built from binomial tails.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Result};

/// Exact big-integer binomials up to this K, a recurrence in f64 above.
pub const EXACT_K: usize = 4096;
pub const GRID: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevPoly {
    pub k: usize,
    pub j: usize,
    /// coefficient of t_{2j+1}
    pub coeffs: Vec<f64>,
    /// max |p~| on the dense grid over [-1, 1]
    pub scale: f64,
    pub kappa_eff: f64,
    pub tol: f64,
}

pub fn formula_k(kappa: f64, tol: f64) -> usize {
    (kappa * kappa * (kappa / tol).ln()).ceil().max(1.0) as usize
}

pub fn formula_j(k: usize, tol: f64) -> usize {
    let k = k as f64;
    (k * (4.0 * k / tol).ln()).sqrt().ceil() as usize
}

fn check(kappa: f64, tol: f64) -> Result<()> {
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("kappa_eff {kappa} must be >= 1")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tol {tol} must lie in (0, 1)")));
    }
    Ok(())
}

/// n / 2^shift as f64 without overflowing on the way.
fn ratio_pow2(n: &BigUint, shift: u64) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return 0.0;
    }
    let drop = bits.saturating_sub(60);
    let top = (n >> drop).to_f64().unwrap_or(0.0);
    top * 2f64.powi((drop as i64 - shift as i64) as i32)
}

fn tails_exact(k: usize, j: usize) -> Vec<f64> {
    // binom(2K, K+t) for t = 0..=K
    let mut row = Vec::with_capacity(k + 1);
    let mut b = BigUint::one();
    for i in 0..k {
        b = b * BigUint::from(2 * k - i) / BigUint::from(i + 1);
    }
    row.push(b.clone());
    for t in 0..k {
        b = b * BigUint::from(k - t) / BigUint::from(k + t + 1);
        row.push(b.clone());
    }
    let mut tail = BigUint::zero();
    let mut out = vec![0.0; j + 1];
    for t in (1..=k).rev() {
        tail += &row[t];
        if t - 1 <= j {
            out[t - 1] = ratio_pow2(&tail, 2 * k as u64);
        }
    }
    out
}

fn tails_f64(k: usize, j: usize) -> Vec<f64> {
    let kf = k as f64;
    let b0 = (std::f64::consts::PI * kf).sqrt().recip()
        * (1.0 - 1.0 / (8.0 * kf) + 1.0 / (128.0 * kf * kf) + 5.0 / (1024.0 * kf.powi(3))
            - 21.0 / (32768.0 * kf.powi(4)));
    let mut b = vec![b0];
    let mut cur = b0;
    for t in 0..k {
        cur *= (k - t) as f64 / (k + t + 1) as f64;
        if cur < 1e-300 {
            break;
        }
        b.push(cur);
    }
    let mut out = vec![0.0; j + 1];
    let mut tail = 0.0;
    for t in (1..b.len()).rev() {
        tail += b[t];
        if t - 1 <= j {
            out[t - 1] = tail;
        }
    }
    out
}

/// c_j = 4 (-1)^j sum_{t>j} binom(2K, K+t) / 4^K for j = 0..=J.
pub fn coefficients(k: usize, j: usize) -> Vec<f64> {
    let tails = if k <= EXACT_K { tails_exact(k, j) } else { tails_f64(k, j) };
    tails
        .into_iter()
        .enumerate()
        .map(|(i, s)| if i % 2 == 0 { 4.0 * s } else { -4.0 * s })
        .collect()
}

/// sum_j c_j t_{2j+1}(z) for |z| <= 1.
pub fn eval_odd(coeffs: &[f64], z: f64) -> f64 {
    let t2 = 2.0 * z * z - 1.0;
    let (mut prev, mut cur) = (z, z);
    let mut acc = 0.0;
    for (i, c) in coeffs.iter().enumerate() {
        // t_{-1} = t_1, so the first step also fits the recurrence
        if i > 0 {
            let next = 2.0 * t2 * cur - prev;
            prev = cur;
            cur = next;
        }
        acc += c * cur;
    }
    acc
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

pub fn grid_max(coeffs: &[f64]) -> f64 {
    let n = GRID.max(4 * (2 * coeffs.len()));
    linspace(-1.0, 1.0, n).map(|z| eval_odd(coeffs, z).abs()).fold(0.0, f64::max)
}

impl ChebyshevPoly {
    pub fn with_degree(kappa: f64, tol: f64, k: usize, j: usize) -> Result<Self> {
        check(kappa, tol)?;
        if k == 0 {
            return Err(Error::InvalidArgument("K must be positive".into()));
        }
        let coeffs = coefficients(k, j);
        let scale = grid_max(&coeffs);
        Ok(Self { k, j, coeffs, scale, kappa_eff: kappa, tol })
    }

    /// p~(z) unnormalized
    pub fn eval(&self, z: f64) -> f64 {
        eval_odd(&self.coeffs, z)
    }

    pub fn eval_normalized(&self, z: f64) -> f64 {
        self.eval(z) / self.scale
    }

    pub fn degree(&self) -> usize {
        2 * self.j + 1
    }

    pub fn abs_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }
}

pub fn inverse_poly(kappa: f64, tol: f64) -> Result<ChebyshevPoly> {
    check(kappa, tol)?;
    let k = formula_k(kappa, tol);
    ChebyshevPoly::with_degree(kappa, tol, k, formula_j(k, tol))
}

/// sup |p~(z) - 1/z| over [1/kappa, 1].
pub fn poly_error_profile(poly: &ChebyshevPoly, kappa: f64) -> f64 {
    linspace(1.0 / kappa, 1.0, GRID)
        .map(|z| (poly.eval(z) - 1.0 / z).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_asymptotic_tails_agree() {
        for k in [1000, 2000, 4096] {
            let a = tails_exact(k, 20);
            let b = tails_f64(k, 20);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12 * x.abs().max(1e-300), "{k}: {x} {y}");
            }
        }
    }

    #[test]
    fn recurrence_matches_cosines() {
        let c = [0.3, -0.2, 0.7, 0.1];
        for z in [-0.9, -0.1, 0.0, 0.4, 1.0] {
            let th = f64::acos(z);
            let want: f64 = c.iter().enumerate().map(|(j, v)| v * ((2 * j + 1) as f64 * th).cos()).sum();
            assert!((eval_odd(&c, z) - want).abs() < 1e-14);
        }
    }
}
