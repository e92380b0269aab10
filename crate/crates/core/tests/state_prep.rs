use nalgebra::DVector;
use qfem::circuit::sim::{simulate, zero_state};
use qfem::fem::{self, LevelSpec};
use qfem::prep::*;

/// ∫ hat_p x^n over [p-h, p+h]: second difference of x^{n+2}/((n+1)(n+2)).
fn hat_moment(p: f64, h: f64, n: i32) -> f64 {
    let m = |x: f64| x.powi(n + 2);
    (m(p + h) - 2.0 * m(p) + m(p - h)) / (h * ((n + 1) * (n + 2)) as f64)
}

fn simulated(ps: &PreparedState) -> Vec<f64> {
    let s = simulate(&ps.circuit, &zero_state(ps.circuit.n_qubits())).unwrap();
    assert!(s.iter().all(|z| z.im.abs() < 1e-12));
    s.iter().map(|z| z.re).collect()
}

#[test]
fn constant_inner_products() {
    let spec = LevelSpec::new(1, 5).unwrap();
    for l in 1..=5 {
        let v = inner_products(&FunctionSpec::Constant(1.0), &spec, l).unwrap();
        assert!(v.iter().all(|x| (x - 2f64.powi(-(l as i32))).abs() < 1e-14));
    }
    let spec2 = LevelSpec::new(2, 3).unwrap();
    for l in 1..=3 {
        let v = inner_products(&FunctionSpec::Constant(1.0), &spec2, l).unwrap();
        assert!(v.iter().all(|x| (x - 4f64.powi(-(l as i32))).abs() < 1e-14));
    }
}

#[test]
fn linear_inner_products() {
    let spec = LevelSpec::new(1, 2).unwrap();
    let v = inner_products(&"poly:0,1".parse().unwrap(), &spec, 2).unwrap();
    for (j, x) in v.iter().enumerate() {
        assert!((x - 0.25 * (j + 1) as f64 / 4.0).abs() < 1e-14);
    }
}

#[test]
fn cubic_is_exact() {
    let spec = LevelSpec::new(1, 4).unwrap();
    let f = FunctionSpec::Polynomial(vec![0.3, -1.0, 2.0, 5.0]);
    for l in 1..=4 {
        let h = spec.h(l);
        let v = inner_products(&f, &spec, l).unwrap();
        for (j, x) in v.iter().enumerate() {
            let p = (j + 1) as f64 * h;
            let want = 0.3 * hat_moment(p, h, 0) - hat_moment(p, h, 1) + 2.0 * hat_moment(p, h, 2) + 5.0 * hat_moment(p, h, 3);
            assert!((x - want).abs() < 1e-12);
        }
    }
}

#[test]
fn block_sums_match_direct_summation() {
    let funcs = [
        FunctionSpec::Constant(1.0),
        FunctionSpec::Polynomial(vec![0.5, 1.0, -2.0]),
        FunctionSpec::general(|x: &[f64]| (3.0 * x[0]).sin() * (1.0 + x.get(1).copied().unwrap_or(0.0))),
    ];
    for d in [1usize, 2] {
        let spec = LevelSpec::new(d, 3).unwrap();
        for f in &funcs {
            for l in 1..=3 {
                let nodes = inner_products(f, &spec, l).unwrap();
                let per = (1usize << l) - 1;
                for k in 1..=d * l {
                    for x in 0..1usize << k {
                        let mut direct = 0.0;
                        for y in 0..1usize << (d * l) {
                            if y >> (d * l - k) != x {
                                continue;
                            }
                            let coords: Vec<usize> = (0..d).map(|i| (y >> ((d - 1 - i) * l)) & ((1 << l) - 1)).collect();
                            if coords.iter().any(|&c| c == per) {
                                continue;
                            }
                            direct += nodes[coords.iter().fold(0, |acc, &c| acc * per + c)];
                        }
                        let got = half_hat_sums(f, &spec, l, k, x).unwrap();
                        assert!((got - direct).abs() < 1e-12, "d={d} l={l} k={k} x={x}: {got} vs {direct}");
                    }
                }
            }
        }
    }
}

#[test]
fn simple_tables() {
    let mut e0 = vec![0.0; 8];
    e0[0] = 2.0;
    let c = build_prep_circuit(&AmplitudeTable::from_amplitudes(&e0).unwrap()).unwrap();
    assert!(c.is_empty());

    let c = build_prep_circuit(&AmplitudeTable::from_amplitudes(&[1.0; 8]).unwrap()).unwrap();
    let s = simulate(&c, &zero_state(3)).unwrap();
    assert!(s.iter().all(|z| (z.re - 8f64.sqrt().recip()).abs() < 1e-12));

    let amps = [0.2, 0.4, -0.1, 0.3, 0.0, 0.5, 0.6, 0.2];
    let t = AmplitudeTable::from_amplitudes(&amps).unwrap();
    let c = build_prep_circuit(&t).unwrap();
    let s = simulate(&c, &zero_state(3)).unwrap();
    let n = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    for (z, a) in s.iter().zip(amps) {
        assert!((z.re - a / n).abs() < 1e-10 && z.im.abs() < 1e-12);
    }
}

#[test]
fn preconditioned_state_matches_dense() {
    let funcs = [FunctionSpec::Constant(1.0), "poly:0,1".parse().unwrap()];
    for (d, big) in [(1, 1), (1, 2), (1, 3), (1, 4), (2, 1), (2, 2)] {
        let spec = LevelSpec::new(d, big).unwrap();
        for f in &funcs {
            let r = DVector::from_vec(load_vector(f, &spec).unwrap());
            let want = fem::assemble_frame(&spec).unwrap().transpose() * r;
            let ps = prep_preconditioned(f, &spec).unwrap();
            assert!((ps.norm - want.norm()).abs() < 1e-12 * want.norm());
            let got = padded_to_frame(&spec, &simulated(&ps));
            let err = got.iter().zip(want.iter()).map(|(a, b)| (a - b / want.norm()).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "d={d} L={big}: {err}");
            assert!(ps.table.consistency_error() < 1e-12);
        }
    }
}

#[test]
fn level_marginal() {
    let spec = LevelSpec::new(1, 4).unwrap();
    let f = FunctionSpec::Constant(1.0);
    let ps = prep_preconditioned(&f, &spec).unwrap();
    let state = simulated(&ps);
    let norms = level_norms(&f, &spec).unwrap();
    let total: f64 = norms.iter().map(|n| n * n).sum();
    let block = 1 << spec.levels();
    for (lam, n) in norms.iter().enumerate() {
        let p: f64 = state[lam * block..(lam + 1) * block].iter().map(|a| a * a).sum();
        assert!((p - n * n / total).abs() < 1e-12);
        assert!((ps.table.g(2)[lam] / ps.table.g(0)[0] - n * n / total).abs() < 1e-12);
    }
}

#[test]
fn load_state_matches_nodes() {
    let spec = LevelSpec::new(1, 4).unwrap();
    let f: FunctionSpec = "poly:1,2".parse().unwrap();
    let ps = prep_load(&f, &spec).unwrap();
    let r = load_vector(&f, &spec).unwrap();
    let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = simulated(&ps);
    for (i, v) in r.iter().enumerate() {
        assert!((s[i] - v / n).abs() < 1e-10);
    }
}

#[test]
fn constant_preparation_is_linear_in_width() {
    let counts: Vec<usize> = (2..=14)
        .map(|big| {
            let spec = LevelSpec::new(1, big).unwrap();
            prep_load(&FunctionSpec::Constant(1.0), &spec).unwrap().circuit.len()
        })
        .collect();
    println!("{counts:?}");
    // full uniformly controlled stages only pay off for short prefixes; past
    // that every extra qubit adds a fixed number of gates
    let inc: Vec<isize> = counts.windows(2).map(|w| w[1] as isize - w[0] as isize).collect();
    assert!(inc[inc.len() - 4..].windows(2).all(|w| w[0] == w[1]), "{counts:?}");
}
