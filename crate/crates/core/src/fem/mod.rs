//! Dense reference construction of every FEM/BPX matrix. This is the oracle
//! layer; sizes are guarded and nothing here is meant to be fast.

mod coefficient;
mod factors;
pub mod sparse;

pub use coefficient::Coefficient;
pub(crate) use coefficient::sym_sqrt;
pub use factors::*;

use crate::{Error, Result};

/// Largest `(2^L-1)^d` accepted by the dense routines.
pub const DENSE_LIMIT: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LevelSpec {
    d: usize,
    levels: usize,
}

impl LevelSpec {
    pub fn new(d: usize, levels: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension d must be >= 1".into()));
        }
        if levels == 0 {
            return Err(Error::InvalidArgument("level L must be >= 1".into()));
        }
        if d * (levels + 1) > 62 {
            return Err(Error::InvalidArgument("index space exceeds 64 bits".into()));
        }
        Ok(Self { d, levels })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Finest level L.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn h(&self, l: usize) -> f64 {
        0.5f64.powi(l as i32)
    }

    /// Interior nodes per axis on level l.
    pub fn nodes_1d(l: usize) -> usize {
        (1 << l) - 1
    }

    pub fn dim_v(&self, l: usize) -> usize {
        Self::nodes_1d(l).pow(self.d as u32)
    }

    pub fn dim_q(&self, l: usize) -> usize {
        1 << (self.d * (l + 1))
    }

    pub fn cells(&self, l: usize) -> usize {
        1 << (self.d * l)
    }

    /// (2^L-1)^d
    pub fn n(&self) -> usize {
        self.dim_v(self.levels)
    }

    /// Number of generating-system columns, sum over levels of dim V_l.
    pub fn frame_dim(&self) -> usize {
        (1..=self.levels).map(|l| self.dim_v(l)).sum()
    }

    /// Column offset of level l inside F.
    pub fn frame_offset(&self, l: usize) -> usize {
        (1..l).map(|k| self.dim_v(k)).sum()
    }

    /// 2^{-l(2-d)/2}
    pub fn level_scale(&self, l: usize) -> f64 {
        2f64.powf(-(l as f64) * (2.0 - self.d as f64) / 2.0)
    }

    /// Rows of C_l and of C_F: d * 2^{d(L+1)}.
    pub fn gradient_rows(&self, l: usize) -> usize {
        self.d * self.dim_q(l)
    }

    pub fn check_dense(&self) -> Result<()> {
        let n = self.n();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                what: "(2^L-1)^d",
                value: n,
                limit: DENSE_LIMIT,
            });
        }
        Ok(())
    }

    /// Midpoint of cell `j` (j_1 most significant) on level l.
    pub fn cell_midpoint(&self, l: usize, j: usize) -> Vec<f64> {
        let per = 1usize << l;
        let h = self.h(l);
        let mut x = vec![0.0; self.d];
        let mut rest = j;
        for i in (0..self.d).rev() {
            x[i] = ((rest % per) as f64 + 0.5) * h;
            rest /= per;
        }
        x
    }

    /// Vertex coordinates of interior node `v` (mixed radix, first axis most significant).
    pub fn node_coords(&self, l: usize, v: usize) -> Vec<f64> {
        let per = Self::nodes_1d(l);
        let h = self.h(l);
        let mut x = vec![0.0; self.d];
        let mut rest = v;
        for i in (0..self.d).rev() {
            x[i] = ((rest % per) + 1) as f64 * h;
            rest /= per;
        }
        x
    }
}
