//! Exact synthesis helpers: two-level (Givens) decomposition of small
//! unitaries, isometry completion, contraction dilation and uniformly
//! controlled rotations.

use nalgebra::DMatrix;

use super::{value_controls, Control, Gate, GateKind, Mat2};
use crate::linalg::sym_eigenvalues;
use crate::{Error, Result, C64};

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn two_level_gate(p: usize, q: usize, g: Mat2, qubits: &[usize]) -> Gate {
    let diff = p ^ q;
    debug_assert!(diff.is_power_of_two());
    let t = diff.trailing_zeros() as usize;
    let m = if p & diff == 0 { g } else { [g[3], g[2], g[1], g[0]] };
    let others: Vec<usize> = (0..qubits.len()).filter(|&b| b != t).collect();
    let cs: Vec<super::Control> = others
        .iter()
        .map(|&b| super::Control {
            qubit: qubits[b],
            on: (p >> b) & 1 == 1,
        })
        .collect();
    Gate::u(qubits[t], m).with_controls(&cs)
}

/// Gates realizing `u` on `qubits` (local bit b is qubits[b]).
pub fn synthesize_unitary(u: &DMatrix<C64>, qubits: &[usize]) -> Result<Vec<Gate>> {
    let dim = 1usize << qubits.len();
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::InvalidArgument("unitary size does not match qubits".into()));
    }
    let mut m = u.clone();
    let mut rots: Vec<Gate> = Vec::new();
    for c in 0..dim {
        let col = gray(c);
        for r in (c + 1..dim).rev() {
            let (p, q) = (gray(r - 1), gray(r));
            let (a, b) = (m[(p, col)], m[(q, col)]);
            if b.norm() < 1e-15 {
                continue;
            }
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let g: Mat2 = [a.conj() / n, b.conj() / n, -b / n, a / n];
            for j in 0..dim {
                let (x, y) = (m[(p, j)], m[(q, j)]);
                m[(p, j)] = g[0] * x + g[1] * y;
                m[(q, j)] = g[2] * x + g[3] * y;
            }
            rots.push(two_level_gate(p, q, g, qubits));
        }
    }
    let mut out = Vec::new();
    let one = C64::new(1.0, 0.0);
    for i in (0..dim).step_by(2) {
        let (d0, d1) = (m[(i, i)], m[(i + 1, i + 1)]);
        if (d0 - one).norm() < 1e-15 && (d1 - one).norm() < 1e-15 {
            continue;
        }
        let z = C64::new(0.0, 0.0);
        let cs = value_controls(&qubits[1..], (i >> 1) as u64);
        out.push(Gate::u(qubits[0], [d0, z, z, d1]).with_controls(&cs));
    }
    for g in rots.iter().rev() {
        out.push(g.inverse());
    }
    Ok(out)
}

pub fn real_to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Extends orthonormal columns `v` to an orthogonal matrix.
pub fn complete_isometry(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = (v.nrows(), v.ncols());
    let gram = v.transpose() * v;
    if (gram - DMatrix::identity(k, k)).abs().max() > 1e-10 {
        return Err(Error::InvalidArgument("columns are not orthonormal".into()));
    }
    let mut cols: Vec<nalgebra::DVector<f64>> = (0..k).map(|j| v.column(j).into_owned()).collect();
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut w = nalgebra::DVector::zeros(n);
        w[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let p = c.dot(&w);
                w -= c * p;
            }
        }
        let nw = w.norm();
        if nw > 1e-8 {
            cols.push(w / nw);
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = a.clone().symmetric_eigen();
    let s = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&s) * e.eigenvectors.transpose()
}

/// Unitary [[B, (I-BBᵀ)^½], [(I-BᵀB)^½, -Bᵀ]] for a real contraction B.
pub fn dilation(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = b.nrows();
    if b.ncols() != m {
        return Err(Error::InvalidArgument("dilation needs a square block".into()));
    }
    let top = sym_eigenvalues(&(b.transpose() * b)).last().copied().unwrap_or(0.0);
    if top > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument("block is not a contraction".into()));
    }
    let id = DMatrix::<f64>::identity(m, m);
    let mut u = DMatrix::zeros(2 * m, 2 * m);
    u.view_mut((0, 0), (m, m)).copy_from(b);
    u.view_mut((0, m), (m, m)).copy_from(&psd_sqrt(&(&id - b * b.transpose())));
    u.view_mut((m, 0), (m, m)).copy_from(&psd_sqrt(&(&id - b.transpose() * b)));
    u.view_mut((m, m), (m, m)).copy_from(&(-b.transpose()));
    Ok(u)
}

/// Ry(angles[x]) on `target` where x is the value on `controls` (controls[i] is bit i),
/// as alternating rotations and CX along a Gray cycle.
pub fn uniformly_controlled_ry(controls: &[usize], target: usize, angles: &[f64]) -> Vec<Gate> {
    let k = controls.len();
    assert_eq!(angles.len(), 1 << k);
    if k == 0 {
        return if angles[0].abs() > 0.0 { vec![Gate::ry(target, angles[0])] } else { vec![] };
    }
    let n = 1usize << k;
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let gi = gray(i);
        let alpha: f64 = (0..n)
            .map(|x| {
                let sign = if (x & gi).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                sign * angles[x]
            })
            .sum::<f64>()
            / n as f64;
        if alpha.abs() > 1e-15 {
            out.push(Gate::ry(target, alpha));
        }
        let flip = (gi ^ gray((i + 1) % n)).trailing_zeros() as usize;
        out.push(Gate::cx(controls[flip], target));
    }
    out
}

/// Prepares sum_i amps[i] |i> (real amplitudes, any signs) on `qubits` from |0>.
pub fn prepare_real_amplitudes(qubits: &[usize], amps: &[f64]) -> Result<Vec<Gate>> {
    let w = qubits.len();
    if amps.len() != 1 << w {
        return Err(Error::InvalidArgument("amplitude vector length mismatch".into()));
    }
    let total: f64 = amps.iter().map(|a| a * a).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("all-zero amplitude vector".into()));
    }
    let mut out = Vec::new();
    // sums of squares per prefix, level k has 2^k entries
    let mut levels: Vec<Vec<f64>> = vec![amps.iter().map(|a| a * a).collect()];
    for _ in 0..w {
        let prev = levels.last().unwrap();
        levels.push(prev.chunks(2).map(|c| c[0] + c[1]).collect());
    }
    levels.reverse();
    for k in 1..=w {
        let target = qubits[w - k];
        let controls: Vec<usize> = qubits[w - k + 1..].to_vec();
        let angles: Vec<f64> = (0..1usize << (k - 1))
            .map(|x| {
                let parent = levels[k - 1][x];
                if parent <= 0.0 {
                    0.0
                } else {
                    2.0 * (levels[k][2 * x] / parent).clamp(0.0, 1.0).sqrt().acos()
                }
            })
            .collect();
        out.extend(uniformly_controlled_ry(&controls, target, &angles));
    }
    out.extend(sign_oracle(qubits, amps));
    Ok(out)
}

/// Phase -1 on each basis state with a negative amplitude.
pub fn sign_oracle(qubits: &[usize], amps: &[f64]) -> Vec<Gate> {
    let mut out = Vec::new();
    for (i, a) in amps.iter().enumerate() {
        if *a < 0.0 {
            let cs = value_controls(&qubits[1..], (i >> 1) as u64);
            let m = if i & 1 == 1 {
                GateKind::Z.matrix().unwrap()
            } else {
                [C64::new(-1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
            };
            out.push(Gate::u(qubits[0], m).with_controls(&cs));
        }
    }
    out
}

/// Toffoli up to a diagonal phase (3 CX). Polarity of the controls is honoured
/// with X conjugation. Only valid where the phase is undone by a mirrored copy.
pub fn margolus(a: Control, b: Control, t: usize) -> Vec<Gate> {
    let q = std::f64::consts::FRAC_PI_4;
    let mut out = Vec::with_capacity(11);
    let flips: Vec<usize> = [a, b].iter().filter(|c| !c.on).map(|c| c.qubit).collect();
    out.extend(flips.iter().map(|&f| Gate::x(f)));
    out.extend([
        Gate::ry(t, q),
        Gate::cx(b.qubit, t),
        Gate::ry(t, q),
        Gate::cx(a.qubit, t),
        Gate::ry(t, -q),
        Gate::cx(b.qubit, t),
        Gate::ry(t, -q),
    ]);
    out.extend(flips.iter().map(|&f| Gate::x(f)));
    out
}

fn literal(c: Control, t: usize) -> Vec<Gate> {
    if c.on {
        vec![Gate::cx(c.qubit, t)]
    } else {
        vec![Gate::x(c.qubit), Gate::cx(c.qubit, t), Gate::x(c.qubit)]
    }
}

/// target ^= AND of the cube, up to a diagonal phase; uses len-2 clean scratch
/// qubits and returns them clean.
pub fn and_into(cube: &[Control], target: usize, scratch: &[usize]) -> Result<Vec<Gate>> {
    match cube.len() {
        0 => return Ok(vec![Gate::x(target)]),
        1 => return Ok(literal(cube[0], target)),
        2 => return Ok(margolus(cube[0], cube[1], target)),
        _ => {}
    }
    let m = cube.len();
    if scratch.len() < m - 2 {
        return Err(Error::InvalidArgument(format!("{m}-literal cube needs {} scratch qubits", m - 2)));
    }
    let mut chain = margolus(cube[0], cube[1], scratch[0]);
    for i in 1..m - 2 {
        chain.extend(margolus(Control::one(scratch[i - 1]), cube[i + 1], scratch[i]));
    }
    let mut out = chain.clone();
    out.extend(margolus(Control::one(scratch[m - 3]), cube[m - 1], target));
    out.extend(chain.iter().rev().map(|g| g.inverse()));
    Ok(out)
}

/// target ^= XOR of the cubes (each via `and_into`).
pub fn xor_cubes(cubes: &[Vec<Control>], target: usize, scratch: &[usize]) -> Result<Vec<Gate>> {
    let mut out = Vec::new();
    for cube in cubes {
        out.extend(and_into(cube, target, scratch)?);
    }
    Ok(out)
}

/// Ry(theta) on t when both controls are |1> (4 CX).
pub fn cc_ry(c1: usize, c2: usize, t: usize, theta: f64) -> Vec<Gate> {
    let q = theta / 4.0;
    vec![
        Gate::cx(c1, t),
        Gate::ry(t, -q),
        Gate::cx(c2, t),
        Gate::ry(t, q),
        Gate::cx(c1, t),
        Gate::ry(t, -q),
        Gate::cx(c2, t),
        Gate::ry(t, q),
    ]
}

/// Controlled Hadamard with one CX: H = Ry(pi/4) Z Ry(-pi/4).
pub fn controlled_h(c: usize, t: usize) -> Vec<Gate> {
    let q = std::f64::consts::FRAC_PI_4;
    vec![Gate::ry(t, -q), Gate::h(t), Gate::cx(c, t), Gate::h(t), Gate::ry(t, q)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::sim::{simulate, unitary, zero_state};
    use crate::circuit::Circuit;

    fn circ(n: usize) -> Circuit {
        let mut c = Circuit::new();
        c.add_register("q", n, false).unwrap();
        c
    }

    #[test]
    fn unitary_synthesis_exact() {
        let v = DMatrix::from_fn(8, 8, |i, j| C64::new(((i * 3 + j * 7) as f64).sin(), ((i + 2 * j) as f64).cos()));
        let q = v.qr().q();
        let mut c = circ(4);
        c.extend(synthesize_unitary(&q, &[3, 0, 2]).unwrap()).unwrap();
        let u = unitary(&c).unwrap();
        // compare on the subspace where qubit 1 is 0
        for col in 0..8usize {
            let idx = |x: usize| ((x & 1) << 3) | (((x >> 1) & 1) << 0) | (((x >> 2) & 1) << 2);
            for row in 0..8usize {
                assert!((u[(idx(row), idx(col))] - q[(row, col)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dilation_is_unitary() {
        let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.2886751345948129, -0.2886751345948129]) * 2f64.sqrt();
        let u = dilation(&b).unwrap();
        assert!((u.transpose() * &u - DMatrix::identity(4, 4)).abs().max() < 1e-12);
        assert!(dilation(&(b * 2.0)).is_err());
    }

    #[test]
    fn completion_keeps_columns() {
        let v = crate::fem::t_local();
        let u = complete_isometry(&v).unwrap();
        assert!((u.columns(0, 2) - &v).abs().max() < 1e-15);
        assert!((u.transpose() * &u - DMatrix::identity(4, 4)).abs().max() < 1e-12);
    }

    #[test]
    fn ucry_matches_definition() {
        let angles = [0.1, -0.7, 1.3, 2.9];
        let mut c = circ(3);
        c.extend(uniformly_controlled_ry(&[0, 2], 1, &angles)).unwrap();
        let u = unitary(&c).unwrap();
        let mut d = circ(3);
        for (x, &a) in angles.iter().enumerate() {
            d.push(Gate::ry(1, a).with_controls(&value_controls(&[0, 2], x as u64))).unwrap();
        }
        let v = unitary(&d).unwrap();
        assert!((u - v).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn amplitude_preparation() {
        let amps = [0.1, -0.5, 0.0, 0.3, 0.2, 0.0, -0.6, 0.4];
        let nrm: f64 = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut c = circ(3);
        c.extend(prepare_real_amplitudes(&[0, 1, 2], &amps).unwrap()).unwrap();
        let s = simulate(&c, &zero_state(3)).unwrap();
        for i in 0..8 {
            assert!((s[i].re - amps[i] / nrm).abs() < 1e-12 && s[i].im.abs() < 1e-12);
        }
        assert!(prepare_real_amplitudes(&[0], &[0.0, 0.0]).is_err());
    }

    fn monomial_like(u: &DMatrix<C64>, want: &DMatrix<C64>) -> bool {
        // u = D * want with D diagonal of unit modulus
        let n = u.nrows();
        (0..n).all(|c| {
            let r = (0..n).find(|&r| want[(r, c)].norm() > 0.5).unwrap();
            (u[(r, c)].norm() - 1.0).abs() < 1e-12
        })
    }

    #[test]
    fn margolus_is_toffoli_up_to_phase() {
        for (pa, pb) in [(true, true), (false, true), (true, false), (false, false)] {
            let mut c = circ(3);
            c.extend(margolus(Control { qubit: 0, on: pa }, Control { qubit: 1, on: pb }, 2)).unwrap();
            let mut t = circ(3);
            t.push(Gate::x(2).with_controls(&[Control { qubit: 0, on: pa }, Control { qubit: 1, on: pb }])).unwrap();
            assert!(monomial_like(&unitary(&c).unwrap(), &unitary(&t).unwrap()));
        }
    }

    #[test]
    fn cube_chain_mirrored_is_exact() {
        // W D W^-1 with D diagonal on the target equals the ideal flag reflection
        let cube = vec![Control::one(0), Control::zero(1), Control::one(2), Control::one(3)];
        let w = and_into(&cube, 6, &[4, 5]).unwrap();
        let mut c = circ(7);
        c.extend(w.clone()).unwrap();
        c.push(Gate::z(6)).unwrap();
        c.extend(w.iter().rev().map(|g| g.inverse())).unwrap();
        let mut ideal = circ(7);
        ideal.push(Gate::x(6).with_controls(&cube)).unwrap();
        ideal.push(Gate::z(6)).unwrap();
        ideal.push(Gate::x(6).with_controls(&cube)).unwrap();
        let (u, v) = (unitary(&c).unwrap(), unitary(&ideal).unwrap());
        // compare on clean scratch columns
        for col in (0..128usize).filter(|x| x & 0b11_0000 == 0) {
            for row in 0..128 {
                assert!((u[(row, col)] - v[(row, col)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn small_controlled_rotations() {
        let mut c = circ(3);
        c.extend(cc_ry(0, 1, 2, 0.7)).unwrap();
        let mut t = circ(3);
        t.push(Gate::ry(2, 0.7).with_controls(&[Control::one(0), Control::one(1)])).unwrap();
        assert!((unitary(&c).unwrap() - unitary(&t).unwrap()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
        let mut c = circ(2);
        c.extend(controlled_h(1, 0)).unwrap();
        let mut t = circ(2);
        t.push(Gate::h(0).ctrl(1)).unwrap();
        assert!((unitary(&c).unwrap() - unitary(&t).unwrap()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }
}
