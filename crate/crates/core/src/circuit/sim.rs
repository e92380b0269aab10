//! Dense statevector simulation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Circuit, Control, Gate, GateKind, Mat2};
use crate::{Error, Result, C64};

pub const MAX_QUBITS: usize = 24;

pub type State = Vec<C64>;

pub fn basis_state(n: usize, index: usize) -> State {
    let mut s = vec![C64::new(0.0, 0.0); 1 << n];
    s[index] = C64::new(1.0, 0.0);
    s
}

pub fn zero_state(n: usize) -> State {
    basis_state(n, 0)
}

pub fn check_size(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::TooLarge {
            what: "qubits",
            value: n,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

pub fn simulate(c: &Circuit, init: &[C64]) -> Result<State> {
    check_size(c.n_qubits())?;
    if init.len() != 1 << c.n_qubits() {
        return Err(Error::InvalidArgument(format!(
            "initial state has length {}, expected {}",
            init.len(),
            1usize << c.n_qubits()
        )));
    }
    let mut s = init.to_vec();
    for g in c.gates() {
        apply_gate(&mut s, g);
    }
    Ok(s)
}

/// Inserts zero bits at the (ascending) `fixed` positions of `x`.
#[inline]
fn deposit(mut x: usize, fixed: &[usize]) -> usize {
    for &p in fixed {
        let low = x & ((1 << p) - 1);
        x = ((x ^ low) << 1) | low;
    }
    x
}

fn control_mask(controls: &[Control]) -> (Vec<usize>, usize) {
    let mut pos = Vec::with_capacity(controls.len() + 2);
    let mut val = 0;
    for c in controls {
        pos.push(c.qubit);
        if c.on {
            val |= 1 << c.qubit;
        }
    }
    (pos, val)
}

fn n_of(state: &[C64]) -> usize {
    state.len().trailing_zeros() as usize
}

pub fn apply_matrix(state: &mut [C64], m: &Mat2, target: usize, controls: &[Control]) {
    let n = n_of(state);
    let (mut fixed, val) = control_mask(controls);
    fixed.push(target);
    fixed.sort_unstable();
    let free = n - fixed.len();
    let bit = 1 << target;
    let diag = m[1].norm_sqr() == 0.0 && m[2].norm_sqr() == 0.0;
    for i in 0..(1usize << free) {
        let i0 = deposit(i, &fixed) | val;
        let i1 = i0 | bit;
        if diag {
            state[i0] *= m[0];
            state[i1] *= m[3];
        } else {
            let (a, b) = (state[i0], state[i1]);
            state[i0] = m[0] * a + m[1] * b;
            state[i1] = m[2] * a + m[3] * b;
        }
    }
}

fn read_bits(i: usize, qubits: &[usize]) -> u64 {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | ((((i >> q) & 1) as u64) << k))
}

fn write_bits(mut i: usize, qubits: &[usize], v: u64) -> usize {
    for (k, &q) in qubits.iter().enumerate() {
        i = (i & !(1 << q)) | ((((v >> k) & 1) as usize) << q);
    }
    i
}

/// Value map of the permutation kinds on an n-bit target register.
pub fn permute_value(kind: &GateKind, v: u64, n: usize) -> u64 {
    let mask = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    match kind {
        GateKind::Swap => ((v & 1) << 1) | ((v >> 1) & 1),
        GateKind::Add(a) => (v as i128 + *a as i128).rem_euclid(1i128 << n) as u64,
        GateKind::Rotate(a) => {
            let r = a.rem_euclid(n as i64) as u32;
            if r == 0 {
                v
            } else {
                ((v >> r) | (v << (n as u32 - r))) & mask
            }
        }
        _ => unreachable!("not a permutation kind"),
    }
}

fn apply_permutation(state: &mut [C64], g: &Gate) {
    let n = n_of(state);
    let (mut fixed, val) = control_mask(&g.controls);
    fixed.sort_unstable();
    let free = n - fixed.len();
    let src = state.to_vec();
    let w = g.targets.len();
    for i in 0..(1usize << free) {
        let idx = deposit(i, &fixed) | val;
        let v = read_bits(idx, &g.targets);
        let nv = permute_value(&g.kind, v, w);
        if nv != v {
            state[write_bits(idx, &g.targets, nv)] = src[idx];
        }
    }
}

pub fn apply_gate(state: &mut [C64], g: &Gate) {
    match &g.kind {
        GateKind::X => {
            let n = n_of(state);
            let t = g.targets[0];
            let (mut fixed, val) = control_mask(&g.controls);
            fixed.push(t);
            fixed.sort_unstable();
            for i in 0..(1usize << (n - fixed.len())) {
                let i0 = deposit(i, &fixed) | val;
                state.swap(i0, i0 | (1 << t));
            }
        }
        GateKind::Swap | GateKind::Add(_) | GateKind::Rotate(_) => apply_permutation(state, g),
        k => {
            let m = k.matrix().expect("single-target gate");
            apply_matrix(state, &m, g.targets[0], &g.controls);
        }
    }
}

pub fn probabilities(state: &[C64]) -> Vec<f64> {
    state.iter().map(|a| a.norm_sqr()).collect()
}

pub fn norm(state: &[C64]) -> f64 {
    state.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Draws `shots` outcomes from an unnormalized probability vector.
pub fn sample_probs(probs: &[f64], shots: u64, rng: &mut impl Rng) -> BTreeMap<usize, u64> {
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cum.push(acc);
    }
    let mut counts = BTreeMap::new();
    if acc <= 0.0 {
        return counts;
    }
    for _ in 0..shots {
        let u = rng.gen::<f64>() * acc;
        let k = cum.partition_point(|&c| c <= u).min(probs.len() - 1);
        *counts.entry(k).or_insert(0) += 1;
    }
    counts
}

pub fn sample(state: &[C64], shots: u64, seed: u64) -> Result<BTreeMap<usize, u64>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_probs(&probabilities(state), shots, &mut rng))
}

pub fn counts_csv(counts: &BTreeMap<usize, u64>) -> String {
    let mut s = String::from("outcome,count\n");
    for (k, v) in counts {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}

/// Full unitary, column i = image of |i>.
pub fn unitary(c: &Circuit) -> Result<DMatrix<C64>> {
    let n = c.n_qubits();
    if n > 12 {
        return Err(Error::TooLarge {
            what: "qubits for unitary",
            value: n,
            limit: 12,
        });
    }
    let dim = 1 << n;
    let mut u = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let s = simulate(c, &basis_state(n, i))?;
        for (r, a) in s.into_iter().enumerate() {
            u[(r, i)] = a;
        }
    }
    Ok(u)
}

/// max |U†U - I|
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let p = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let e = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - e).norm());
        }
    }
    worst
}

/// max_ij |a_ij - e^{i phi} b_ij| with phi fitted on the largest entry of b.
pub fn distance_up_to_phase(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let (mut bi, mut best) = (0, -1.0);
    for (k, v) in b.iter().enumerate() {
        if v.norm() > best {
            best = v.norm();
            bi = k;
        }
    }
    let ph = if best > 0.0 {
        let r = a.as_slice()[bi] / b.as_slice()[bi];
        r / r.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - ph * y).norm())
        .fold(0.0, f64::max)
}
