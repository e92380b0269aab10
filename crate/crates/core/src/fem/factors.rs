use nalgebra::{DMatrix, DVector};

use super::{Coefficient, LevelSpec};
use crate::linalg::{group_perm, kron_all, permute_cols, permute_rows, sym_eigenvalues};
use crate::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// 2x2 local block of R_{l,1D} (rows: local basis psi_0, psi_1).
pub fn r_local() -> DMatrix<f64> {
    let b = 1.0 / (2.0 * SQRT3);
    DMatrix::from_row_slice(2, 2, &[0.5, 0.5, b, -b])
}

pub fn c_local() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0])
}

/// 4x2 one-level transfer isometry; rows (child bit, k'), columns k.
pub fn t_local() -> DMatrix<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(
        4,
        2,
        &[1.0, -SQRT3 / 2.0, 0.0, 0.5, 1.0, SQRT3 / 2.0, 0.0, 0.5],
    ) * s
}

/// I_l: first 2^l-1 columns of the 2^l identity.
pub fn embed_identity(l: usize) -> DMatrix<f64> {
    let n = 1 << l;
    DMatrix::from_fn(n, n - 1, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// N_l: I_l shifted down by one row.
pub fn embed_shift(l: usize) -> DMatrix<f64> {
    let n = 1 << l;
    DMatrix::from_fn(n, n - 1, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
}

/// [I_l; N_l] interleaved so that row (cell, b) takes I for b=0 and N for b=1.
pub fn stack_in(l: usize) -> DMatrix<f64> {
    let n = 1 << l;
    let i = embed_identity(l);
    let s = embed_shift(l);
    DMatrix::from_fn(2 * n, n - 1, |r, c| if r % 2 == 0 { i[(r / 2, c)] } else { s[(r / 2, c)] })
}

#[derive(Clone, Debug)]
pub struct Factors1d {
    pub r: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub i: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

pub fn r1d(l: usize) -> DMatrix<f64> {
    let id = DMatrix::identity(1 << l, 1 << l);
    id.kronecker(&r_local()) * stack_in(l) * 2f64.powf(-(l as f64) / 2.0)
}

pub fn c1d(l: usize) -> DMatrix<f64> {
    let id = DMatrix::identity(1 << l, 1 << l);
    id.kronecker(&c_local()) * stack_in(l) * 2f64.powf(l as f64 / 2.0)
}

/// T_{l,l+1,1D}
pub fn t1d(l: usize) -> DMatrix<f64> {
    DMatrix::<f64>::identity(1 << l, 1 << l).kronecker(&t_local())
}

pub fn assemble_1d_factors(l: usize) -> Result<Factors1d> {
    if l == 0 {
        return Err(Error::InvalidArgument("level must be >= 1".into()));
    }
    Ok(Factors1d {
        r: r1d(l),
        c: c1d(l),
        t: t1d(l),
        i: embed_identity(l),
        n: embed_shift(l),
    })
}

/// T_{l,L,1D} = T_{L-1,L} ... T_{l,l+1}
pub fn transfer_1d(l: usize, levels: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(2 << l, 2 << l);
    for k in l..levels {
        m = t1d(k) * m;
    }
    m
}

fn check_level(spec: &LevelSpec, l: usize) -> Result<()> {
    if l == 0 || l > spec.levels() {
        return Err(Error::InvalidArgument(format!(
            "level {l} outside 1..={}",
            spec.levels()
        )));
    }
    Ok(())
}

/// C_l with rows in (j_1..j_d, s, k_1..k_d) order and columns the V_l nodes.
pub fn assemble_gradient(spec: &LevelSpec, l: usize) -> Result<DMatrix<f64>> {
    check_level(spec, l)?;
    let d = spec.d();
    let (r, c) = (r1d(l), c1d(l));
    let nq = spec.dim_q(l);
    let nk = 1usize << d;
    let perm = group_perm(&vec![1 << l; d], &vec![2; d]);
    let mut out = DMatrix::zeros(d * nq, spec.dim_v(l));
    for s in 0..d {
        let factors: Vec<DMatrix<f64>> = (0..d)
            .map(|i| if i == s { c.clone() } else { r.clone() })
            .collect();
        let block = permute_rows(&kron_all(&factors), &perm);
        for row in 0..nq {
            let (j, k) = (row / nk, row % nk);
            out.row_mut((j * d + s) * nk + k).copy_from(&block.row(row));
        }
    }
    Ok(out)
}

/// T_{l,L} on Q_l^d -> Q_L^d, both sides in (j..., k...) order.
pub fn assemble_transfer(spec: &LevelSpec, l: usize) -> Result<DMatrix<f64>> {
    check_level(spec, l)?;
    let d = spec.d();
    let big = spec.levels();
    let t = transfer_1d(l, big);
    let m = kron_all(&vec![t; d]);
    let rows = group_perm(&vec![1 << big; d], &vec![2; d]);
    let cols = group_perm(&vec![1 << l; d], &vec![2; d]);
    Ok(permute_cols(&permute_rows(&m, &rows), &cols))
}

/// T~_{l,L}: T_{l,L} with the identity on s inserted between j and k.
pub fn assemble_transfer_tilde(spec: &LevelSpec, l: usize) -> Result<DMatrix<f64>> {
    let t = assemble_transfer(spec, l)?;
    let d = spec.d();
    let nk = 1usize << d;
    let mut out = DMatrix::zeros(t.nrows() * d, t.ncols() * d);
    for r in 0..t.nrows() {
        for c in 0..t.ncols() {
            let v = t[(r, c)];
            if v == 0.0 {
                continue;
            }
            let (j, k) = (r / nk, r % nk);
            let (jj, kk) = (c / nk, c % nk);
            for s in 0..d {
                out[((j * d + s) * nk + k, (jj * d + s) * nk + kk)] = v;
            }
        }
    }
    Ok(out)
}

/// 1D nodal interpolation V_l -> V_L.
pub fn prolongation_1d(l: usize, levels: usize) -> DMatrix<f64> {
    let nf = LevelSpec::nodes_1d(levels);
    let nc = LevelSpec::nodes_1d(l);
    let ratio = (1usize << (levels - l)) as f64;
    DMatrix::from_fn(nf, nc, |w, v| {
        let dist = ((w + 1) as f64 - (v + 1) as f64 * ratio).abs() / ratio;
        (1.0 - dist).max(0.0)
    })
}

pub fn prolongation(spec: &LevelSpec, l: usize) -> Result<DMatrix<f64>> {
    check_level(spec, l)?;
    Ok(kron_all(&vec![prolongation_1d(l, spec.levels()); spec.d()]))
}

/// Generating system F with column blocks 2^{-l(2-d)/2} P_l.
pub fn assemble_frame(spec: &LevelSpec) -> Result<DMatrix<f64>> {
    spec.check_dense()?;
    let mut f = DMatrix::zeros(spec.n(), spec.frame_dim());
    for l in 1..=spec.levels() {
        let p = prolongation(spec, l)? * spec.level_scale(l);
        f.columns_mut(spec.frame_offset(l), p.ncols()).copy_from(&p);
    }
    Ok(f)
}

/// C_F with column blocks 2^{-l(2-d)/2} T~_{l,L} C_l.
pub fn assemble_cf(spec: &LevelSpec) -> Result<DMatrix<f64>> {
    spec.check_dense()?;
    let big = spec.levels();
    let mut out = DMatrix::zeros(spec.gradient_rows(big), spec.frame_dim());
    for l in 1..=big {
        let blk = assemble_transfer_tilde(spec, l)? * assemble_gradient(spec, l)? * spec.level_scale(l);
        out.columns_mut(spec.frame_offset(l), blk.ncols()).copy_from(&blk);
    }
    Ok(out)
}

/// S = C_Lᵀ (D_A ⊗ Id) C_L
pub fn assemble_stiffness(spec: &LevelSpec, coef: &Coefficient) -> Result<DMatrix<f64>> {
    spec.check_dense()?;
    let c = assemble_gradient(spec, spec.levels())?;
    let dc = coef.apply_d_a_kron_id(spec, &c)?;
    Ok(c.transpose() * dc)
}

#[derive(Clone, Debug)]
pub struct Bpx {
    pub f: DMatrix<f64>,
    pub c_f: DMatrix<f64>,
    pub ftsf: DMatrix<f64>,
}

pub fn assemble_bpx(spec: &LevelSpec, coef: &Coefficient) -> Result<Bpx> {
    let f = assemble_frame(spec)?;
    let c_f = assemble_cf(spec)?;
    let ftsf = c_f.transpose() * coef.apply_d_a_kron_id(spec, &c_f)?;
    Ok(Bpx { f, c_f, ftsf })
}

#[derive(Clone, Debug)]
pub struct QoiReference {
    pub c: DVector<f64>,
    pub qoi: f64,
}

pub fn solve_and_qoi(
    spec: &LevelSpec,
    coef: &Coefficient,
    r: &DVector<f64>,
    m: &DVector<f64>,
) -> Result<QoiReference> {
    let s = assemble_stiffness(spec, coef)?;
    if r.len() != s.nrows() || m.len() != s.nrows() {
        return Err(Error::InvalidArgument("vector length does not match S".into()));
    }
    let chol = s.cholesky().ok_or(Error::Singular)?;
    let c = chol.solve(r);
    let qoi = m.dot(&c);
    Ok(QoiReference { c, qoi })
}

/// Extreme nonzero eigenvalues of FᵀSF, via the similar N×N problem
/// Lᵀ(FFᵀ)L with S = LLᵀ.
pub fn preconditioned_spectrum(spec: &LevelSpec, coef: &Coefficient) -> Result<Vec<f64>> {
    let s = assemble_stiffness(spec, coef)?;
    let f = assemble_frame(spec)?;
    let l = s.cholesky().ok_or(Error::Singular)?.unpack();
    let p = &f * f.transpose();
    let m = l.transpose() * p * &l;
    Ok(sym_eigenvalues(&(&m + m.transpose()) .scale(0.5)))
}

pub fn effective_condition(spec: &LevelSpec, coef: &Coefficient) -> Result<f64> {
    let e = preconditioned_spectrum(spec, coef)?;
    Ok(e[e.len() - 1] / e[0])
}

pub fn stiffness_condition(spec: &LevelSpec, coef: &Coefficient) -> Result<f64> {
    let e = sym_eigenvalues(&assemble_stiffness(spec, coef)?);
    Ok(e[e.len() - 1] / e[0])
}

/// Exact |C_l|: CᵀC is a sum of Kronecker products of the commuting 1D
/// Toeplitz matrices, so its eigenvalues combine per frequency.
pub fn gradient_norm(spec: &LevelSpec, l: usize) -> f64 {
    let n = LevelSpec::nodes_1d(l);
    let pi = std::f64::consts::PI;
    let mc: Vec<f64> = (1..=n)
        .map(|i| 2f64.powi(l as i32 + 2) * (i as f64 * pi / 2f64.powi(l as i32 + 1)).sin().powi(2))
        .collect();
    let mr: Vec<f64> = (1..=n)
        .map(|i| 0.5f64.powi(l as i32) * (2.0 / 3.0 + (i as f64 * pi / (1 << l) as f64).cos() / 3.0))
        .collect();
    let d = spec.d();
    let mut best: f64 = 0.0;
    let total = n.pow(d as u32);
    for idx in 0..total {
        let mut freq = vec![0; d];
        let mut rest = idx;
        for f in freq.iter_mut().rev() {
            *f = rest % n;
            rest /= n;
        }
        let mut sum = 0.0;
        for s in 0..d {
            let mut prod = 1.0;
            for (i, &fi) in freq.iter().enumerate() {
                prod *= if i == s { mc[fi] } else { mr[fi] };
            }
            sum += prod;
        }
        best = best.max(sum);
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;

    #[test]
    fn one_d_shapes() {
        let f = assemble_1d_factors(2).unwrap();
        assert_eq!((f.r.nrows(), f.r.ncols()), (8, 3));
        assert_eq!((f.c.nrows(), f.c.ncols()), (8, 3));
        assert_eq!((f.t.nrows(), f.t.ncols()), (16, 8));
        assert!(assemble_1d_factors(0).is_err());
    }

    #[test]
    fn c1_norm_is_two() {
        assert!((spectral_norm(&c1d(1)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn local_transfer_is_isometry() {
        let t = t_local();
        assert!((t.transpose() * &t - DMatrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn gradient_norm_matches_svd() {
        for (d, l) in [(1, 1), (1, 3), (2, 1), (2, 2), (3, 1)] {
            let spec = LevelSpec::new(d, l).unwrap();
            let c = assemble_gradient(&spec, l).unwrap();
            assert!((gradient_norm(&spec, l) - spectral_norm(&c)).abs() < 1e-10, "d={d} l={l}");
        }
    }

    #[test]
    fn prolongation_reproduces_linear() {
        let p = prolongation_1d(1, 3);
        // coarse node at 1/2 is the hat reaching 0 at 0 and 1
        let col: Vec<f64> = p.column(0).iter().copied().collect();
        assert_eq!(col, vec![0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25]);
    }
}
