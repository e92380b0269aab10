use nalgebra::DMatrix;
use qfem::cf::*;
use qfem::circuit::decompose::to_native;
use qfem::circuit::sim::{basis_state, simulate};
use qfem::encoding::BlockEncoding;
use qfem::fem::{self, Coefficient, LevelSpec};

fn real(e: &BlockEncoding) -> DMatrix<f64> {
    let m = e.extract_matrix().unwrap();
    assert!(m.iter().all(|z| z.im.abs() < 1e-10));
    m.map(|z| z.re)
}

fn diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (a - b).abs().max()
}

#[test]
fn gradient_matches_reference() {
    for (d, big) in [(1, 4), (2, 2)] {
        let spec = LevelSpec::new(d, big).unwrap();
        for l in 1..=big {
            let e = build_u_grad(&spec, l).unwrap();
            let want = fem::assemble_gradient(&spec, l).unwrap();
            assert!(diff(&real(&e), &want) < 1e-10, "d={d} l={l}");
            let lhs = spec.level_scale(l) * e.gamma;
            assert!((lhs - 2.0 * (d as f64).sqrt()).abs() < 1e-12);
            let pi2 = std::f64::consts::PI.powi(2);
            let cap = (d as f64 * (1.0 + pi2 / 3.0 * 4f64.powi(-(l as i32)))).sqrt();
            let sub = e.subnorm_bound.unwrap();
            if d == 1 {
                // exact: the top 1D stiffness eigenvalue is 2^l 4cos^2(pi 2^{-l-1})
                let exact = 1.0 / (std::f64::consts::PI * 2f64.powi(-(l as i32) - 1)).cos();
                assert!((sub - exact).abs() < 1e-12);
            }
            // the small-angle cap undershoots 1/cos(pi/4) on the coarsest 1D level
            if !(d == 1 && l == 1) {
                assert!(sub <= cap + 1e-12, "d={d} l={l}: {sub} > {cap}");
            }
        }
    }
}

#[test]
fn transfer_matches_reference() {
    for (d, big) in [(1, 4), (2, 2)] {
        let spec = LevelSpec::new(d, big).unwrap();
        for l in 1..=big {
            let t = real(&build_u_transfer(&spec, l, false).unwrap());
            assert!(diff(&t, &fem::assemble_transfer(&spec, l).unwrap()) < 1e-10);
            let gram = t.transpose() * &t;
            assert!(diff(&gram, &DMatrix::identity(t.ncols(), t.ncols())) < 1e-10);
            let tt = real(&build_u_transfer(&spec, l, true).unwrap());
            assert!(diff(&tt, &fem::assemble_transfer_tilde(&spec, l).unwrap()) < 1e-10);
        }
    }
}

#[test]
fn generic_cf_matches_reference() {
    for (d, big) in [(1, 1), (1, 2), (1, 3), (1, 4), (2, 1), (2, 2)] {
        let spec = LevelSpec::new(d, big).unwrap();
        let e = build_u_cf(&spec).unwrap();
        let want = fem::assemble_cf(&spec).unwrap();
        assert!(diff(&real(&e), &want) < 1e-9, "d={d} L={big}");
        assert!((e.gamma.powi(2) - 4.0 * (d * big) as f64).abs() < 1e-10);
        let sub = e.subnorm_bound.unwrap();
        let norm = want.singular_values().max();
        assert!(sub >= e.gamma / norm - 1e-9);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(sub * sub <= d as f64 * (big as f64 + pi2 / 4.0));
    }
}

#[test]
fn optimized_cf_matches_generic() {
    for (d, big) in [(1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (2, 1), (2, 2), (2, 3)] {
        let spec = LevelSpec::new(d, big).unwrap();
        let g = build_u_cf(&spec).unwrap();
        let o = build_u_cf_optimized(&spec).unwrap();
        assert!((g.gamma - o.gamma).abs() < 1e-12);
        assert!(diff(&real(&g), &real(&o)) < 1e-9, "d={d} L={big}");
    }
}

#[test]
fn factored_input_flag_matches_projection() {
    for big in 1..=4 {
        let spec = LevelSpec::new(1, big).unwrap();
        let u = build_u_cf_optimized(&spec).unwrap();
        let mut c = u.circuit.empty_like();
        let sc = c.add_register("sc", input_flag_scratch(&spec), true).unwrap();
        let flag = c.add_register("flag", 1, true).unwrap();
        let scratch: Vec<usize> = (sc..flag).collect();
        c.extend(input_flag_gates(&spec, &c, flag, &scratch).unwrap()).unwrap();
        // data registers occupy the low qubits; ancillas start at zero
        let data_bits = c.reg("a1").unwrap().start + 1;
        let mut hits = 0;
        for x in 0..1usize << data_bits {
            let out = simulate(&c, &basis_state(c.n_qubits(), x)).unwrap();
            let (idx, amp) = out.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
            assert!((amp.norm() - 1.0).abs() < 1e-9);
            let want = u.pi_in.contains(&u.circuit, x).unwrap();
            assert_eq!((idx >> flag) & 1 == 1, want, "L={big} x={x:b}");
            hits += want as usize;
        }
        assert_eq!(hits, spec.frame_dim());
    }
}

#[test]
fn optimized_is_cheaper() {
    let spec = LevelSpec::new(1, 4).unwrap();
    let g = to_native(&build_u_cf(&spec).unwrap().circuit).unwrap().counts();
    let o = to_native(&build_u_cf_optimized(&spec).unwrap().circuit).unwrap().counts();
    println!("generic {g:?} optimized {o:?}");
    assert!(o.total() < g.total());
    assert!(o.two_qubit < g.two_qubit);
}

#[test]
fn stiffness_sandwich_constants() {
    for (d, big) in [(1, 1), (1, 2), (1, 3), (1, 4), (2, 1), (2, 2)] {
        let spec = LevelSpec::new(d, big).unwrap();
        let coef = Coefficient::from_scalar_fn(&spec, |x| 1.0 + x[0]).unwrap();
        let da = build_u_da(&spec, &coef).unwrap();
        let cf = build_u_cf_optimized(&spec).unwrap();
        let t = std::time::Instant::now();
        let s = stiffness_sandwich(&cf, &da).unwrap();
        let m = real(&s);
        let f = fem::assemble_cf(&spec).unwrap();
        let want = f.transpose() * coef.d_a_kron_id(&spec).unwrap() * &f;
        assert!(diff(&m, &want) < 1e-9);
        let gamma = 4.0 * coef.beta() * (d * big) as f64;
        assert!((s.gamma - gamma).abs() < 1e-9 * gamma);
        let measured = s.gamma / m.singular_values().max();
        let pi2 = std::f64::consts::PI.powi(2);
        let cap = coef.beta() / coef.alpha() * da.subnorm_bound.unwrap() * d as f64 * (big as f64 + pi2 / 4.0);
        println!(
            "d={d} L={big} qubits={} measured={measured:.4} cap={cap:.4} native={:?} {:?}",
            s.n_qubits(),
            to_native(&s.circuit).unwrap().counts(),
            t.elapsed()
        );
        assert!(measured <= cap);
    }
}
