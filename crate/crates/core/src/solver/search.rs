//! Smallest solver cost reaching a tolerance, by emulation against a sparse
//! direct solve.

use nalgebra_sparse::CsrMatrix;

use super::emulate::{apply_poly_prefix, SparseReference};
use super::poly::{coefficients, formula_j, formula_k};
use super::pipeline::encoding_gamma;
use crate::fem::{gradient_norm, sparse, Coefficient, LevelSpec};
use crate::linalg::{norm, Scaled};
use crate::prep::{load_vector, preconditioned_load, FunctionSpec};
use crate::Result;

const BISECTIONS: usize = 10;
/// geometric grid on [κ_min, 2κ_min]; the least J is not monotone in κ
const REFINE: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub preconditioned: bool,
    pub kappa_eff: f64,
    pub k: usize,
    pub j: usize,
    /// applications of Y or Yᵀ: 2J + 1
    pub steps: usize,
    pub rel_error: f64,
}

/// One emulated solve x ≈ (Yᵀ)⁺ b for either Y = (D_A^{1/2} ⊗ Id) C_F with
/// b = Fᵀr, or Y = (D_A^{1/2} ⊗ Id) C_L with b = r. Both aim at the same x.
pub struct SearchProblem {
    pub preconditioned: bool,
    y: CsrMatrix<f64>,
    pub gamma: f64,
    rhs: Vec<f64>,
    target: Vec<f64>,
}

impl SearchProblem {
    pub fn new(spec: &LevelSpec, coef: &Coefficient, f: &FunctionSpec, preconditioned: bool) -> Result<Self> {
        let y = sparse::scaled_factor(spec, coef, preconditioned)?;
        let (gamma, rhs) = if preconditioned {
            (encoding_gamma(spec, coef), preconditioned_load(f, spec)?)
        } else {
            (coef.beta().sqrt() * gradient_norm(spec, spec.levels()), load_vector(f, spec)?)
        };
        let r = load_vector(f, spec)?;
        let target = SparseReference::new(spec, coef)?.target(&r);
        Ok(Self { preconditioned, y, gamma, rhs, target })
    }

    /// Smallest J with relative error <= tol for the K of this κ, capped at
    /// the formula degree, with the error reached.
    pub fn min_j(&self, kappa: f64, tol: f64) -> Option<(usize, usize, f64)> {
        let k = formula_k(kappa.max(1.0), tol);
        let cap = formula_j(k, tol);
        let c = coefficients(k, cap);
        let m = Scaled { op: &self.y, factor: 1.0 / self.gamma };
        let want: Vec<f64> = self.target.iter().map(|t| t * self.gamma).collect();
        let scale = norm(&want);
        let mut hit = None;
        apply_poly_prefix(&c, &m, &self.rhs, |j, x| {
            let err = x.iter().zip(&want).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / scale;
            if err <= tol {
                hit = Some((k, j, err));
                return false;
            }
            true
        });
        hit
    }
}

fn record(p: bool, kappa: f64, (k, j, err): (usize, usize, f64)) -> SearchResult {
    SearchResult { preconditioned: p, kappa_eff: kappa, k, j, steps: 2 * j + 1, rel_error: err }
}

/// Bisection on log κ for the smallest feasible κ_eff, then a scan of larger
/// κ, since a series just feasible at its threshold may need a high degree.
pub fn kappa_eff_search(problem: &SearchProblem, tol: f64) -> Result<SearchResult> {
    let p = problem.preconditioned;
    let mut lo = 1.0f64;
    let mut hi = 2.0f64;
    let mut best = loop {
        if let Some(h) = problem.min_j(hi, tol) {
            break record(p, hi, h);
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Err(crate::Error::InvalidArgument("no κ_eff reaches the tolerance".into()));
        }
    };
    if lo == 1.0 {
        if let Some(h) = problem.min_j(1.0, tol) {
            return Ok(record(p, 1.0, h));
        }
    }
    for _ in 0..BISECTIONS {
        let mid = (lo * hi).sqrt();
        match problem.min_j(mid, tol) {
            Some(h) => {
                hi = mid;
                best = record(p, mid, h);
            }
            None => lo = mid,
        }
    }
    let base = best.kappa_eff;
    for i in 1..=REFINE {
        let f = 2f64.powf(i as f64 / REFINE as f64);
        if let Some(h) = problem.min_j(base * f, tol) {
            if h.1 < best.j {
                best = record(p, base * f, h);
            }
        }
    }
    Ok(best)
}
