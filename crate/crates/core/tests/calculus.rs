use nalgebra::DMatrix;
use qfem::circuit::sim::{unitarity_defect, unitary};
use qfem::circuit::{Circuit, Gate};
use qfem::encoding::*;
use qfem::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: usize = 100;

mod common;
use common::{bound, random_enc};

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn check_common(e: &BlockEncoding, want: &DMatrix<C64>, gamma: f64) {
    let got = e.extract_matrix().unwrap();
    assert!(max_diff(&got, want) < 1e-10, "extraction mismatch {}", max_diff(&got, want));
    assert!((e.gamma - gamma).abs() < 1e-12 * gamma);
    assert!(e.n_qubits() <= 12);
    assert!(unitarity_defect(&unitary(&e.circuit).unwrap()) < 1e-10);
    let norm = want.singular_values().max();
    if let (Some(s), true) = (e.subnorm_bound, norm > 1e-9) {
        assert!(s >= e.gamma / norm - 1e-9, "subnorm {s} < {}", e.gamma / norm);
    }
}

fn direct_sum(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut(a.shape(), b.shape()).copy_from(b);
    m
}

#[test]
fn tensor_matches_kronecker() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..CASES {
        let a = random_enc(&mut rng, "a", "a", 0, 0);
        let b = random_enc(&mut rng, "b", "b", 0, 0);
        let t = tensor(&a, &b).unwrap();
        let want = a.extract_matrix().unwrap().kronecker(&b.extract_matrix().unwrap());
        check_common(&t, &want, a.gamma * b.gamma);
        let exact = a.subnorm_bound.unwrap() * b.subnorm_bound.unwrap();
        assert!((t.subnorm_bound.unwrap() - exact).abs() < 1e-9 * exact);
    }
}

#[test]
fn tensor_rejects_shared_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_enc(&mut rng, "a", "a", 2, 2);
    assert!(tensor(&a, &a).is_err());
}

#[test]
fn adjoint_is_conjugate_transpose() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..CASES {
        let a = random_enc(&mut rng, "a", "b", 0, 0);
        let d = adjoint(&a);
        check_common(&d, &a.extract_matrix().unwrap().adjoint(), a.gamma);
        let back = adjoint(&d).extract_matrix().unwrap();
        assert!(max_diff(&back, &a.extract_matrix().unwrap()) < 1e-12);
    }
}

#[test]
fn block_diag_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..CASES {
        let a = random_enc(&mut rng, "a", "a", 0, 0);
        let breg = if rng.gen() { "a" } else { "b" };
        let b = random_enc(&mut rng, breg, breg, 0, 0);
        let d = block_diag(&a, &b).unwrap();
        let want = direct_sum(&a.extract_matrix().unwrap(), &b.extract_matrix().unwrap());
        check_common(&d, &want, a.gamma.max(b.gamma));
    }
}

#[test]
fn hconcat_and_vstack_match_concatenation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..CASES {
        let bo = bound(&mut rng);
        let a = random_enc(&mut rng, "a", "a", 0, bo);
        let breg = if rng.gen() { "a" } else { "b" };
        let b = random_enc(&mut rng, breg, "a", 0, bo);
        let (ma, mb) = (a.extract_matrix().unwrap(), b.extract_matrix().unwrap());
        let h = hconcat(&[a.clone(), b.clone()], "c").unwrap();
        let mut want = DMatrix::zeros(ma.nrows(), ma.ncols() + mb.ncols());
        want.view_mut((0, 0), ma.shape()).copy_from(&ma);
        want.view_mut((0, ma.ncols()), mb.shape()).copy_from(&mb);
        let g = (a.gamma.powi(2) + b.gamma.powi(2)).sqrt();
        check_common(&h, &want, g);

        let (at, bt) = (adjoint(&a), adjoint(&b));
        let v = vstack(&[at, bt], "r").unwrap();
        check_common(&v, &want.adjoint(), g);
    }
}

#[test]
fn three_way_hconcat() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..CASES / 4 {
        let bo = bound(&mut rng);
        let parts: Vec<BlockEncoding> =
            (0..3).map(|_| random_enc(&mut rng, "a", "a", 0, bo)).collect();
        let ms: Vec<DMatrix<C64>> = parts.iter().map(|p| p.extract_matrix().unwrap()).collect();
        let cols: usize = ms.iter().map(|m| m.ncols()).sum();
        let mut want = DMatrix::zeros(bo as usize, cols);
        let mut off = 0;
        for m in &ms {
            want.view_mut((0, off), m.shape()).copy_from(m);
            off += m.ncols();
        }
        let g = parts.iter().map(|p| p.gamma.powi(2)).sum::<f64>().sqrt();
        check_common(&hconcat(&parts, "c").unwrap(), &want, g);
    }
}

#[test]
fn add_matches_linear_combination() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..CASES {
        let (bi, bo) = (bound(&mut rng), bound(&mut rng));
        let a = random_enc(&mut rng, "a", "a", bi, bo);
        let b = random_enc(&mut rng, "a", "a", bi, bo);
        let (mu_a, mu_b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let s = add(mu_a, &a, mu_b, &b).unwrap();
        let want = a.extract_matrix().unwrap() * C64::new(mu_a, 0.0)
            + b.extract_matrix().unwrap() * C64::new(mu_b, 0.0);
        check_common(&s, &want, mu_a.abs() * a.gamma + mu_b.abs() * b.gamma);
        assert!(s.subnorm_bound.is_none());
    }
}

#[test]
fn add_half_each_is_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_enc(&mut rng, "a", "a", 3, 3);
    let b = random_enc(&mut rng, "a", "a", 3, 3);
    let s = add(0.5, &a, 0.5, &b).unwrap();
    let want = (a.extract_matrix().unwrap() + b.extract_matrix().unwrap()) * C64::new(0.5, 0.0);
    assert!(max_diff(&s.extract_matrix().unwrap(), &want) < 1e-12);
    let zero = add(1.0, &a, 0.0, &b).unwrap();
    assert!(max_diff(&zero.extract_matrix().unwrap(), &a.extract_matrix().unwrap()) < 1e-12);
}

#[test]
fn multiply_matches_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..CASES {
        let mid = bound(&mut rng);
        let a = random_enc(&mut rng, "a", "a", mid, 0);
        let breg = if rng.gen() { "a" } else { "b" };
        let mut b = random_enc(&mut rng, breg, "a", 0, mid);
        let mb = b.extract_matrix().unwrap();
        let sv = mb.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if lo > 1e-6 {
            b = b.with_cond_hint(hi / lo);
        }
        let p = multiply(&a, &b).unwrap();
        let want = a.extract_matrix().unwrap() * mb;
        check_common(&p, &want, a.gamma * b.gamma);
    }
}

#[test]
fn multiply_by_isometry_keeps_subnorm() {
    // column-orthonormal left factor embedding 2 dims into 4
    let id = BlockEncoding::identity(&[("a", 2, 4)]).unwrap();
    let iso = BlockEncoding::from_parts(
        1.0,
        id.circuit.clone(),
        Projection::range(Span::new("a", 0, 2), 2).unwrap(),
        id.pi_out.clone(),
    )
    .unwrap()
    .with_norm_hint(1.0)
    .with_cond_hint(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let b = random_enc(&mut rng, "a", "a", 0, 2);
        let p = multiply(&iso, &b).unwrap();
        assert!((p.subnorm_bound.unwrap() - b.subnorm_bound.unwrap()).abs() < 1e-12);
        let norm = p.extract_matrix().unwrap().singular_values().max();
        assert!(p.subnorm_bound.unwrap() >= p.gamma / norm - 1e-9);
    }
}

#[test]
fn identity_product_is_neutral() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_enc(&mut rng, "a", "a", 3, 2);
    let id = BlockEncoding::identity(&[("a", 2, 2)]).unwrap();
    let p = multiply(&id, &a).unwrap();
    assert_eq!(p.gamma, a.gamma);
    assert!(max_diff(&p.extract_matrix().unwrap(), &a.extract_matrix().unwrap()) < 1e-12);
}

#[test]
fn controlled_blocks_of_scalars() {
    // per-cell Ry encodings of a_j on a one-qubit ancilla, times identity
    let a = [0.3f64, 1.0, 0.55, 0.8];
    let beta = 1.0;
    let e = controlled_block_diag(&[("j", 2)], 4, |j| {
        let mut c = Circuit::new();
        c.add_register("w", 1, true).unwrap();
        c.push(Gate::ry(0, 2.0 * (a[j] / beta).acos())).unwrap();
        BlockEncoding::from_parts(beta, c, Projection::zero(), Projection::zero())
    })
    .unwrap();
    let id = BlockEncoding::identity(&[("k", 1, 2)]).unwrap();
    let t = tensor(&e, &id).unwrap();
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, a.iter().map(|&x| C64::new(x, 0.0))));
    let want = diag.kronecker(&DMatrix::<C64>::identity(2, 2));
    assert!(max_diff(&t.extract_matrix().unwrap(), &want) < 1e-12);
}

#[test]
fn controlled_rejects_selector_use() {
    let r = controlled_block_diag(&[("j", 1)], 2, |_| Ok(BlockEncoding::identity(&[("j", 1, 2)]).unwrap()));
    assert!(r.is_err());
}

#[test]
fn extraction_size_guard() {
    let mut c = Circuit::new();
    c.add_register("big", 23, false).unwrap();
    assert!(BlockEncoding::encode_unitary(c).extract_matrix().is_err());
}

#[test]
fn dump_roundtrip_of_composite() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_enc(&mut rng, "a", "a", 3, 3);
    let b = random_enc(&mut rng, "a", "a", 3, 3);
    let p = multiply(&a, &b).unwrap();
    let back = Circuit::parse(&p.circuit.dump()).unwrap();
    assert_eq!(back.gates().len(), p.circuit.gates().len());
    let u1 = unitary(&back).unwrap();
    let u2 = unitary(&p.circuit).unwrap();
    assert!((u1 - u2).norm() < 1e-10);
}
