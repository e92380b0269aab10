//! Depolarizing noise by stochastic Pauli insertion on the native gate list.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::decompose::to_native;
use super::sim::{apply_gate, check_size, probabilities, sample, sample_probs, simulate, zero_state, State};
use super::{Circuit, Gate, GateKind};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub eps1: f64,
    pub eps2: f64,
}

impl NoiseModel {
    /// Two-qubit error `eps2`, single-qubit error 1e-2 * eps2.
    pub fn new(eps2: f64) -> Result<Self> {
        Self::with_eps1(1e-2 * eps2, eps2)
    }

    pub fn with_eps1(eps1: f64, eps2: f64) -> Result<Self> {
        for e in [eps1, eps2] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::InvalidArgument(format!("error probability {e} outside [0,1]")));
            }
        }
        Ok(Self { eps1, eps2 })
    }

    pub fn is_noiseless(&self) -> bool {
        self.eps1 == 0.0 && self.eps2 == 0.0
    }
}

const PAULI: [GateKind; 3] = [GateKind::X, GateKind::Y, GateKind::Z];

fn pauli(state: &mut [C64], q: usize, p: usize) {
    if p > 0 {
        apply_gate(state, &Gate::new(PAULI[p - 1].clone(), vec![q]));
    }
}

/// Pauli error drawn uniformly among the non-identity ones on the gate's qubits.
pub(crate) fn random_pauli(state: &mut [C64], g: &Gate, rng: &mut impl Rng) {
    let qs: Vec<usize> = g.qubits().collect();
    match qs.len() {
        1 => pauli(state, qs[0], rng.gen_range(1..4)),
        2 => {
            let p = rng.gen_range(1..16);
            pauli(state, qs[0], p & 3);
            pauli(state, qs[1], p >> 2);
        }
        _ => {}
    }
}

/// Error probability attached to a native gate.
pub fn gate_error(g: &Gate, noise: &NoiseModel) -> f64 {
    match g.qubits().count() {
        1 => noise.eps1,
        2 => noise.eps2,
        _ => 0.0,
    }
}

/// Applies `g`, then a random Pauli with the gate's error probability.
pub(crate) fn noisy_gate(state: &mut [C64], g: &Gate, noise: &NoiseModel, rng: &mut impl Rng) {
    apply_gate(state, g);
    let e = gate_error(g, noise);
    if e > 0.0 && rng.gen::<f64>() < e {
        random_pauli(state, g, rng);
    }
}

/// Runs one noisy trajectory of an already native circuit in place.
pub fn run_trajectory(native: &Circuit, noise: &NoiseModel, state: &mut State, rng: &mut impl Rng) {
    for g in native.gates() {
        noisy_gate(state, g, noise, rng);
    }
}

/// Rng of trajectory `index` derived from a base seed.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// One trajectory per shot.
pub fn simulate_noisy(c: &Circuit, noise: &NoiseModel, shots: u64, seed: u64) -> Result<BTreeMap<usize, u64>> {
    if noise.is_noiseless() {
        let s = simulate(c, &zero_state(c.n_qubits()))?;
        return sample(&s, shots, seed);
    }
    simulate_noisy_pooled(c, noise, shots, shots, seed)
}

/// `trajectories` noisy runs with the shots split evenly between them.
pub fn simulate_noisy_pooled(
    c: &Circuit,
    noise: &NoiseModel,
    trajectories: u64,
    shots: u64,
    seed: u64,
) -> Result<BTreeMap<usize, u64>> {
    check_size(c.n_qubits())?;
    if trajectories == 0 || shots == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory and one shot".into()));
    }
    let native = to_native(c)?;
    let n = c.n_qubits();
    let parts: Vec<BTreeMap<usize, u64>> = (0..trajectories)
        .into_par_iter()
        .map(|t| {
            let share = shots / trajectories + u64::from(t < shots % trajectories);
            let mut rng = trajectory_rng(seed, t);
            let mut s = zero_state(n);
            run_trajectory(&native, noise, &mut s, &mut rng);
            if share == 0 {
                BTreeMap::new()
            } else {
                sample_probs(&probabilities(&s), share, &mut rng)
            }
        })
        .collect();
    let mut total = BTreeMap::new();
    for p in parts {
        for (k, v) in p {
            *total.entry(k).or_insert(0) += v;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell_chain(reps: usize) -> Circuit {
        let mut c = Circuit::new();
        c.add_register("q", 2, false).unwrap();
        for _ in 0..reps {
            c.push(Gate::cx(0, 1)).unwrap();
        }
        c
    }

    #[test]
    fn noiseless_reduces_to_sampling() {
        let mut c = bell_chain(1);
        c.gates_mut().insert(0, Gate::h(0));
        let n = NoiseModel::new(0.0).unwrap();
        let a = simulate_noisy(&c, &n, 500, 3).unwrap();
        let s = simulate(&c, &zero_state(2)).unwrap();
        assert_eq!(a, sample(&s, 500, 3).unwrap());
    }

    #[test]
    fn reproducible_and_decaying() {
        let n = NoiseModel::new(0.007).unwrap();
        let mut last = 1.0;
        for reps in [10, 50, 100] {
            let c = bell_chain(reps);
            let a = simulate_noisy(&c, &n, 2000, 11).unwrap();
            assert_eq!(a, simulate_noisy(&c, &n, 2000, 11).unwrap());
            let p0 = *a.get(&0).unwrap_or(&0) as f64 / 2000.0;
            assert!(p0 < last + 0.02, "reps {reps}: {p0} vs {last}");
            last = p0;
        }
        assert!(last < 0.8);
    }

    #[test]
    fn model_validation() {
        assert!(NoiseModel::new(1.5).is_err());
        let m = NoiseModel::new(1e-3).unwrap();
        assert!((m.eps1 - 1e-5).abs() < 1e-18);
    }
}
