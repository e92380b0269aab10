//! Small dense/sparse helpers shared by the oracle layer and the emulation path.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::{Error, Result};

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

pub fn kron_all(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::from_element(1, 1, 1.0);
    for m in mats {
        out = out.kronecker(m);
    }
    out
}

/// `out.row(i) = m.row(perm[i])`
pub fn permute_rows(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    assert_eq!(perm.len(), m.nrows());
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(perm[i], j)])
}

pub fn permute_cols(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    assert_eq!(perm.len(), m.ncols());
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, perm[j])])
}

/// Permutation taking the interleaved order (a_1,b_1,a_2,b_2,...) to
/// (a_1,...,a_d,b_1,...,b_d); `perm[new] = old`. Radices are per factor pair.
pub fn group_perm(a_dims: &[usize], b_dims: &[usize]) -> Vec<usize> {
    let d = a_dims.len();
    assert_eq!(d, b_dims.len());
    let total: usize = a_dims.iter().zip(b_dims).map(|(a, b)| a * b).product();
    let mut perm = vec![0; total];
    for (new, p) in perm.iter_mut().enumerate() {
        // decode new index in grouped order: a_1..a_d most significant first, then b_1..b_d
        let mut rest = new;
        let mut bs = vec![0; d];
        let mut as_ = vec![0; d];
        for i in (0..d).rev() {
            bs[i] = rest % b_dims[i];
            rest /= b_dims[i];
        }
        for i in (0..d).rev() {
            as_[i] = rest % a_dims[i];
            rest /= a_dims[i];
        }
        let mut old = 0;
        for i in 0..d {
            old = old * a_dims[i] + as_[i];
            old = old * b_dims[i] + bs[i];
        }
        *p = old;
    }
    perm
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}

/// Ratio of largest to smallest singular value above `rel * largest`.
pub fn nonzero_condition(sv: &[f64], rel: f64) -> f64 {
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv
        .iter()
        .cloned()
        .filter(|&s| s > rel * max)
        .fold(f64::INFINITY, f64::min);
    max / min
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

pub fn frobenius_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn dense_to_csr(m: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                coo.push(i, j, v);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn sparse_kron(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(a.nrows() * b.nrows(), a.ncols() * b.ncols());
    for (i, j, &x) in a.triplet_iter() {
        for (k, l, &y) in b.triplet_iter() {
            coo.push(i * b.nrows() + k, j * b.ncols() + l, x * y);
        }
    }
    CsrMatrix::from(&coo)
}

pub fn sparse_identity(n: usize) -> CsrMatrix<f64> {
    CsrMatrix::identity(n)
}

/// Matrix-free access used by the Chebyshev recurrence and iterative references.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// y = A x
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// y = Aᵀ x
    fn apply_t(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = 0.0;
            for (j, xj) in x.iter().enumerate() {
                *yi += self[(i, j)] * xj;
            }
        }
    }
    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.column(j).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

impl LinearOperator for CsrMatrix<f64> {
    fn nrows(&self) -> usize {
        CsrMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        CsrMatrix::ncols(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.row_iter().enumerate() {
            y[i] = row
                .col_indices()
                .iter()
                .zip(row.values())
                .map(|(&j, v)| v * x[j])
                .sum();
        }
    }
    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.row_iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (&j, v) in row.col_indices().iter().zip(row.values()) {
                y[j] += v * xi;
            }
        }
    }
}

/// A scaled by a positive constant.
pub struct Scaled<'a, T: LinearOperator + ?Sized> {
    pub op: &'a T,
    pub factor: f64,
}

impl<T: LinearOperator + ?Sized> LinearOperator for Scaled<'_, T> {
    fn nrows(&self) -> usize {
        self.op.nrows()
    }
    fn ncols(&self) -> usize {
        self.op.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply(x, y);
        y.iter_mut().for_each(|v| *v *= self.factor);
    }
    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_t(x, y);
        y.iter_mut().for_each(|v| *v *= self.factor);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradients for SPD operators given only as `apply`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let stop = rtol * rtol * rr;
    for _ in 0..max_iter {
        if rr <= stop {
            break;
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

pub fn write_matrix_csv<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "{},{}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut lines = r.lines();
    let bad = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };
    let header = lines.next().ok_or_else(|| bad(1, "missing header"))??;
    let dims: Vec<usize> = header
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(1, "bad header"))?;
    if dims.len() != 2 {
        return Err(bad(1, "header must be rows,cols"));
    }
    let mut data = Vec::with_capacity(dims[0] * dims[1]);
    for (i, line) in lines.enumerate() {
        let line = line?;
        for tok in line.split(',') {
            data.push(tok.trim().parse::<f64>().map_err(|_| bad(i + 2, "bad value"))?);
        }
    }
    if data.len() != dims[0] * dims[1] {
        return Err(bad(0, "entry count does not match header"));
    }
    Ok(DMatrix::from_row_slice(dims[0], dims[1], &data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_perm_two_factors() {
        // (a1,b1,a2,b2) with all radices 2 -> (a1,a2,b1,b2)
        let p = group_perm(&[2, 2], &[2, 2]);
        // new index 0b0100 means a1=0,a2=1,b1=0,b2=0 -> old (a1,b1,a2,b2)=0,0,1,0 = 0b0010
        assert_eq!(p[0b0100], 0b0010);
        assert_eq!(p[0b0010], 0b0100);
        assert_eq!(p[0b1111], 0b1111);
    }

    #[test]
    fn csv_roundtrip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 3.25, 0.0, 1e-17, 7.0]);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("2,3\n"));
        let back = read_matrix_csv(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csr_operator_matches_dense() {
        let m = DMatrix::from_fn(5, 3, |i, j| (i as f64 - 2.0 * j as f64).sin());
        let s = dense_to_csr(&m);
        let x = [0.3, -1.0, 2.0];
        let z = [1.0, 0.0, -2.0, 0.5, 4.0];
        let (mut y1, mut y2) = (vec![0.0; 5], vec![0.0; 5]);
        LinearOperator::apply(&m, &x, &mut y1);
        s.apply(&x, &mut y2);
        let (mut t1, mut t2) = (vec![0.0; 3], vec![0.0; 3]);
        LinearOperator::apply_t(&m, &z, &mut t1);
        s.apply_t(&z, &mut t2);
        for (a, b) in y1.iter().zip(&y2).chain(t1.iter().zip(&t2)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn sparse_kron_matches_dense() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 3.0, 4.0, 0.0, 0.5]);
        let k = sparse_kron(&dense_to_csr(&a), &dense_to_csr(&b));
        let dense = kron(&a, &b);
        let back = DMatrix::from(&k);
        assert_eq!(back, dense);
    }
}
