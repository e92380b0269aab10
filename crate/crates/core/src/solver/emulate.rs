//! Matrix-recurrence emulation of the polynomial solver.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CscMatrix, CsrMatrix};

use super::poly::ChebyshevPoly;
use crate::fem::{sparse, Coefficient, LevelSpec};
use crate::linalg::{dot, LinearOperator};
use crate::{Error, Result};

/// sum_j c_j t_{2j+1}(M) v on singular values, via the three-term recurrence
/// on [[0, M], [Mᵀ, 0]] started at (0, v). `each(j, x)` sees the partial sum
/// through term j and may stop the run by returning false. Uses 2J+1
/// applications of M or Mᵀ.
pub fn apply_poly_prefix<M: LinearOperator + ?Sized>(
    coeffs: &[f64],
    m: &M,
    v: &[f64],
    mut each: impl FnMut(usize, &[f64]) -> bool,
) -> Vec<f64> {
    let (nr, nc) = (m.nrows(), m.ncols());
    assert_eq!(v.len(), nc, "vector does not match the operator");
    let mut b = v.to_vec();
    let mut a = vec![0.0; nr];
    m.apply(&b, &mut a);
    let mut x: Vec<f64> = a.iter().map(|t| coeffs.first().copied().unwrap_or(0.0) * t).collect();
    if coeffs.is_empty() || !each(0, &x) {
        return x;
    }
    let mut tb = vec![0.0; nc];
    let mut ta = vec![0.0; nr];
    for (j, c) in coeffs.iter().enumerate().skip(1) {
        m.apply_t(&a, &mut tb);
        for (bi, t) in b.iter_mut().zip(&tb) {
            *bi = 2.0 * t - *bi;
        }
        m.apply(&b, &mut ta);
        for ((ai, t), xi) in a.iter_mut().zip(&ta).zip(x.iter_mut()) {
            *ai = 2.0 * t - *ai;
            *xi += c * *ai;
        }
        if !each(j, &x) {
            break;
        }
    }
    x
}

/// p~(M) v with the unnormalized coefficients of `poly`. Expects |M| <= 1.
pub fn apply_poly_matrix<M: LinearOperator + ?Sized>(poly: &ChebyshevPoly, m: &M, v: &[f64]) -> Vec<f64> {
    apply_poly_prefix(&poly.coeffs, m, v, |_, _| true)
}

/// Sparse direct solves with S = Yᵀ Y, Y = (D_A^{1/2} ⊗ Id) C_L.
pub struct SparseReference {
    y: CsrMatrix<f64>,
    chol: CscCholesky<f64>,
}

impl SparseReference {
    pub fn new(spec: &LevelSpec, coef: &Coefficient) -> Result<Self> {
        let y = sparse::scaled_factor(spec, coef, false)?;
        let s = &y.transpose() * &y;
        let chol = CscCholesky::factor(&CscMatrix::from(&s)).map_err(|_| Error::Singular)?;
        Ok(Self { y, chol })
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let b = DMatrix::from_column_slice(r.len(), 1, r);
        self.chol.solve(&b).as_slice().to_vec()
    }

    /// (Yᵀ)⁺ r = Y S⁻¹ r, the vector every solver variant aims at.
    pub fn target(&self, r: &[f64]) -> Vec<f64> {
        let c = self.solve(r);
        let mut out = vec![0.0; self.y.nrows()];
        self.y.apply(&c, &mut out);
        out
    }

    pub fn qoi(&self, m: &[f64], r: &[f64]) -> f64 {
        dot(m, &self.solve(r))
    }
}
