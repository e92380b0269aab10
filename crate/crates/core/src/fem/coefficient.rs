use nalgebra::DMatrix;

use super::LevelSpec;
use crate::{Error, Result};

/// Piecewise constant SPD diffusion coefficient on the cells of the finest grid.
#[derive(Clone, Debug)]
pub struct Coefficient {
    d: usize,
    cells: Vec<DMatrix<f64>>,
    alpha: f64,
    beta: f64,
}

impl Coefficient {
    pub fn from_cells(d: usize, cells: Vec<DMatrix<f64>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidArgument("no cells".into()));
        }
        let mut alpha = f64::INFINITY;
        let mut beta: f64 = 0.0;
        for (j, a) in cells.iter().enumerate() {
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::InvalidArgument(format!("cell {j} is not {d}x{d}")));
            }
            let asym = (a - a.transpose()).abs().max();
            if asym > 1e-12 * a.abs().max().max(1.0) || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NotSpd(j));
            }
            let ev = a.clone().symmetric_eigen().eigenvalues;
            let lo = ev.min();
            if lo <= 0.0 {
                return Err(Error::NotSpd(j));
            }
            alpha = alpha.min(lo);
            beta = beta.max(ev.max());
        }
        Ok(Self {
            d,
            cells,
            alpha,
            beta,
        })
    }

    pub fn constant(spec: &LevelSpec, a: f64) -> Result<Self> {
        Self::from_scalar_fn(spec, |_| a)
    }

    /// Scalar coefficient a(x)·Id sampled at the midpoints of the finest cells.
    pub fn from_scalar_fn(spec: &LevelSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = spec.d();
        Self::from_matrix_fn(spec, |x| DMatrix::identity(d, d) * f(x))
    }

    pub fn from_matrix_fn(spec: &LevelSpec, f: impl Fn(&[f64]) -> DMatrix<f64>) -> Result<Self> {
        let l = spec.levels();
        let cells = (0..spec.cells(l))
            .map(|j| f(&spec.cell_midpoint(l, j)))
            .collect();
        Self::from_cells(spec.d(), cells)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, j: usize) -> &DMatrix<f64> {
        &self.cells[j]
    }

    /// Per-cell scalars when every cell is a multiple of the identity.
    pub fn scalar_values(&self) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.cells.len());
        for a in &self.cells {
            let s = a[(0, 0)];
            let iso = DMatrix::<f64>::identity(self.d, self.d) * s;
            if (a - iso).abs().max() > 1e-14 * s.abs() {
                return None;
            }
            out.push(s);
        }
        Some(out)
    }

    fn check(&self, spec: &LevelSpec) -> Result<()> {
        if spec.d() != self.d || spec.cells(spec.levels()) != self.cells.len() {
            return Err(Error::InvalidArgument(
                "coefficient does not match the level spec".into(),
            ));
        }
        Ok(())
    }

    /// D_A ⊗ Id_{2^d} in the row order (j, s, k).
    pub fn d_a_kron_id(&self, spec: &LevelSpec) -> Result<DMatrix<f64>> {
        self.check(spec)?;
        Ok(self.block_kron_id(spec, |a| a.clone()))
    }

    /// D_A^{1/2} ⊗ Id_{2^d}, cellwise symmetric square root.
    pub fn sqrt_d_a_kron_id(&self, spec: &LevelSpec) -> Result<DMatrix<f64>> {
        self.check(spec)?;
        Ok(self.block_kron_id(spec, sym_sqrt))
    }

    /// (D_A ⊗ Id_{2^d}) m without forming the block diagonal.
    pub fn apply_d_a_kron_id(&self, spec: &LevelSpec, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(spec)?;
        let d = self.d;
        let nk = 1usize << d;
        if m.nrows() != self.cells.len() * d * nk {
            return Err(Error::InvalidArgument("row count does not match D_A".into()));
        }
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, a) in self.cells.iter().enumerate() {
            for s in 0..d {
                for t in 0..d {
                    let w = a[(s, t)];
                    if w == 0.0 {
                        continue;
                    }
                    for k in 0..nk {
                        let (r, q) = ((j * d + s) * nk + k, (j * d + t) * nk + k);
                        for c in 0..m.ncols() {
                            out[(r, c)] += w * m[(q, c)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn block_kron_id(&self, _spec: &LevelSpec, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> DMatrix<f64> {
        let d = self.d;
        let nk = 1usize << d;
        let n = self.cells.len() * d * nk;
        let mut out = DMatrix::zeros(n, n);
        for (j, a) in self.cells.iter().enumerate() {
            let b = f(a);
            for s in 0..d {
                for t in 0..d {
                    for k in 0..nk {
                        out[((j * d + s) * nk + k, (j * d + t) * nk + k)] = b[(s, t)];
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = a.clone().symmetric_eigen();
    let sq = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&sq) * e.eigenvectors.transpose()
}
