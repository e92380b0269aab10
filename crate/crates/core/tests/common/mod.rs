#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use qfem::circuit::{Circuit, Gate};
use qfem::encoding::{BlockEncoding, Projection, Span};
use qfem::fem::{Coefficient, LevelSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Element-by-element Q1 Galerkin assembly with 2-point Gauss quadrature
/// per axis (exact for products of Q1 gradients).
pub fn textbook_stiffness(spec: &LevelSpec, coef: &Coefficient) -> DMatrix<f64> {
    let d = spec.d();
    let l = spec.levels();
    let h = spec.h(l);
    let per = 1i64 << l;
    let mut index = HashMap::new();
    for v in 0..spec.n() {
        let key: Vec<i64> = spec.node_coords(l, v).iter().map(|x| (x / h).round() as i64).collect();
        index.insert(key, v);
    }
    let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let nv = 1usize << d;
    let mut s = DMatrix::zeros(spec.n(), spec.n());
    for j in 0..spec.cells(l) {
        let a = coef.cell(j);
        let corner: Vec<i64> = spec.cell_midpoint(l, j).iter().map(|x| (x / h - 0.5).round() as i64).collect();
        let mut ke = DMatrix::<f64>::zeros(nv, nv);
        for q in 0..nv {
            let t: Vec<f64> = (0..d).map(|i| g[(q >> i) & 1]).collect();
            let grad = |vert: usize| -> DVector<f64> {
                DVector::from_fn(d, |k, _| {
                    let mut p = 1.0;
                    for i in 0..d {
                        let hi = (vert >> i) & 1 == 1;
                        p *= if i == k {
                            if hi { 1.0 / h } else { -1.0 / h }
                        } else if hi {
                            t[i]
                        } else {
                            1.0 - t[i]
                        };
                    }
                    p
                })
            };
            let w = h.powi(d as i32) / nv as f64;
            let grads: Vec<DVector<f64>> = (0..nv).map(grad).collect();
            for va in 0..nv {
                let ag = a * &grads[va];
                for vb in 0..nv {
                    ke[(va, vb)] += w * ag.dot(&grads[vb]);
                }
            }
        }
        let global: Vec<Option<usize>> = (0..nv)
            .map(|vert| {
                let key: Vec<i64> = (0..d).map(|i| corner[i] + ((vert >> i) & 1) as i64).collect();
                if key.iter().any(|&k| k == 0 || k == per) {
                    None
                } else {
                    Some(index[&key])
                }
            })
            .collect();
        for va in 0..nv {
            for vb in 0..nv {
                if let (Some(p), Some(q)) = (global[va], global[vb]) {
                    s[(p, q)] += ke[(va, vb)];
                }
            }
        }
    }
    s
}

/// Random circuit on data registers (name, 2 qubits) plus one ancilla "anc".
/// Projections are prefixes of the data registers; a zero bound is drawn at random.
pub fn random_enc(rng: &mut ChaCha8Rng, in_reg: &str, out_reg: &str, bin: u64, bout: u64) -> BlockEncoding {
    let mut c = Circuit::new();
    c.add_register(in_reg, 2, false).unwrap();
    if out_reg != in_reg {
        c.add_register(out_reg, 2, false).unwrap();
    }
    c.add_register("anc", 1, true).unwrap();
    let n = c.n_qubits();
    for _ in 0..rng.gen_range(4..10) {
        let t = rng.gen_range(0..n);
        let g = match rng.gen_range(0..5) {
            0 => Gate::ry(t, rng.gen_range(-3.0..3.0)),
            1 => Gate::rz(t, rng.gen_range(-3.0..3.0)),
            2 => Gate::h(t),
            _ => {
                let mut o = rng.gen_range(0..n);
                while o == t {
                    o = rng.gen_range(0..n);
                }
                if rng.gen() {
                    Gate::cx(o, t)
                } else {
                    Gate::ry(t, rng.gen_range(-3.0..3.0)).anti(o)
                }
            }
        };
        c.push(g).unwrap();
    }
    let bin = if bin == 0 { bound(rng) } else { bin };
    let bout = if bout == 0 { bound(rng) } else { bout };
    let gamma = rng.gen_range(0.5..2.0);
    let pin = Projection::range(Span::new(in_reg, 0, 2), bin).unwrap();
    let pout = Projection::range(Span::new(out_reg, 0, 2), bout).unwrap();
    let e = BlockEncoding::from_parts(gamma, c, pin, pout).unwrap();
    let norm = e.extract_matrix().unwrap().singular_values().max();
    e.with_norm_hint(norm)
}

pub fn bound(rng: &mut ChaCha8Rng) -> u64 {
    rng.gen_range(1..=4)
}

