//! CSR versions of C_L, C_F and D_A used by the emulation path at sizes
//! beyond the dense guard.

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::{Coefficient, LevelSpec};
use crate::linalg::{dense_to_csr, sparse_kron};
use crate::{Error, Result};

/// Map an interleaved (j_1,k_1,...,j_d,k_d) row index to (j..., s, k...).
fn grouped_row(idx: usize, d: usize, jbits: usize, s: usize) -> usize {
    let mut j = 0usize;
    let mut k = 0usize;
    for i in 0..d {
        let shift = (d - 1 - i) * (jbits + 1);
        let pair = (idx >> shift) & ((1 << (jbits + 1)) - 1);
        j = (j << jbits) | (pair >> 1);
        k = (k << 1) | (pair & 1);
    }
    (j * d + s) * (1 << d) + k
}

pub fn gradient(spec: &LevelSpec, l: usize) -> Result<CsrMatrix<f64>> {
    if l == 0 || l > spec.levels() {
        return Err(Error::InvalidArgument("level out of range".into()));
    }
    let d = spec.d();
    let r = dense_to_csr(&super::r1d(l));
    let c = dense_to_csr(&super::c1d(l));
    let mut coo = CooMatrix::new(spec.gradient_rows(l), spec.dim_v(l));
    for s in 0..d {
        let mut blk = CsrMatrix::identity(1);
        for i in 0..d {
            blk = sparse_kron(&blk, if i == s { &c } else { &r });
        }
        for (i, j, &v) in blk.triplet_iter() {
            coo.push(grouped_row(i, d, l, s), j, v);
        }
    }
    Ok(CsrMatrix::from(&coo))
}

fn transfer_tilde(spec: &LevelSpec, l: usize) -> CsrMatrix<f64> {
    let d = spec.d();
    let big = spec.levels();
    let t1 = dense_to_csr(&super::transfer_1d(l, big));
    let mut t = CsrMatrix::identity(1);
    for _ in 0..d {
        t = sparse_kron(&t, &t1);
    }
    let mut coo = CooMatrix::new(spec.gradient_rows(big), spec.gradient_rows(l));
    for (i, j, &v) in t.triplet_iter() {
        for s in 0..d {
            coo.push(grouped_row(i, d, big, s), grouped_row(j, d, l, s), v);
        }
    }
    CsrMatrix::from(&coo)
}

pub fn cf(spec: &LevelSpec) -> Result<CsrMatrix<f64>> {
    let big = spec.levels();
    let mut coo = CooMatrix::new(spec.gradient_rows(big), spec.frame_dim());
    for l in 1..=big {
        let blk = &transfer_tilde(spec, l) * &gradient(spec, l)?;
        let off = spec.frame_offset(l);
        let sc = spec.level_scale(l);
        for (i, j, &v) in blk.triplet_iter() {
            coo.push(i, off + j, v * sc);
        }
    }
    Ok(CsrMatrix::from(&coo))
}

/// (D_A^{1/2} ⊗ Id) as CSR.
pub fn sqrt_d_a(spec: &LevelSpec, coef: &Coefficient) -> Result<CsrMatrix<f64>> {
    let d = spec.d();
    let nk = 1usize << d;
    if coef.num_cells() != spec.cells(spec.levels()) {
        return Err(Error::InvalidArgument("coefficient does not match spec".into()));
    }
    let n = coef.num_cells() * d * nk;
    let mut coo = CooMatrix::new(n, n);
    for j in 0..coef.num_cells() {
        let b = super::coefficient::sym_sqrt(coef.cell(j));
        for s in 0..d {
            for t in 0..d {
                if b[(s, t)] != 0.0 {
                    for k in 0..nk {
                        coo.push((j * d + s) * nk + k, (j * d + t) * nk + k, b[(s, t)]);
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from(&coo))
}

/// Y = (D_A^{1/2} ⊗ Id) C with C either C_F (preconditioned) or C_L.
pub fn scaled_factor(spec: &LevelSpec, coef: &Coefficient, preconditioned: bool) -> Result<CsrMatrix<f64>> {
    let c = if preconditioned {
        cf(spec)?
    } else {
        gradient(spec, spec.levels())?
    };
    let sq = sqrt_d_a(spec, coef)?;
    Ok(&sq * &c)
}

/// Generating system F as CSR, column blocks 2^{-l(2-d)/2} P_l.
pub fn frame(spec: &LevelSpec) -> Result<CsrMatrix<f64>> {
    let big = spec.levels();
    let mut coo = CooMatrix::new(spec.n(), spec.frame_dim());
    for l in 1..=big {
        let p1 = dense_to_csr(&super::prolongation_1d(l, big));
        let mut p = CsrMatrix::identity(1);
        for _ in 0..spec.d() {
            p = sparse_kron(&p, &p1);
        }
        let (off, sc) = (spec.frame_offset(l), spec.level_scale(l));
        for (i, j, &v) in p.triplet_iter() {
            coo.push(i, off + j, v * sc);
        }
    }
    Ok(CsrMatrix::from(&coo))
}
