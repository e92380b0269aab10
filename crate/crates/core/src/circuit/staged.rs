//! Circuits run in stages with post-selection in between, exactly or under
//! depolarizing noise.
//!
//! The noisy estimate is stratified on the first faulty gate: with no fault
//! the outcome is the noiseless one (weight prod(1 - eps)), otherwise a
//! trajectory starts from a noiseless checkpoint, forces a Pauli at a fault
//! location drawn from its exact distribution and runs noisily to the end.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::decompose::to_native;
use super::noise::{gate_error, noisy_gate, random_pauli, trajectory_rng, NoiseModel};
use super::sim::{apply_gate, check_size, zero_state, State};
use super::{Circuit, Gate};
use crate::{Error, Result, C64};

/// Post-selection target: sorted basis indices.
pub type Keep = Vec<usize>;

#[derive(Clone, Debug)]
pub struct Stage {
    pub circuit: Circuit,
    /// one set for inner stages (the kept branch), any number for the last
    pub keep: Vec<Keep>,
}

#[derive(Clone, Debug)]
pub struct Program {
    n: usize,
    stages: Vec<Stage>,
    offsets: Vec<usize>,
}

#[derive(Clone)]
struct Checkpoint {
    stage: usize,
    gate: usize,
    state: State,
    events: Vec<f64>,
    q: f64,
}

/// Outcome probabilities of the stratified estimator.
#[derive(Clone, Debug)]
pub struct Stratified {
    pub clean: Vec<f64>,
    /// probability that no gate fails
    pub no_error: f64,
    /// one event vector per faulty trajectory
    pub pool: Vec<Vec<f64>>,
}

impl Stratified {
    pub fn mean(&self) -> Vec<f64> {
        if self.pool.is_empty() {
            return self.clean.clone();
        }
        let m = self.pool.len() as f64;
        self.clean
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let faulty: f64 = self.pool.iter().map(|e| e[i]).sum::<f64>() / m;
                self.no_error * c + (1.0 - self.no_error) * faulty
            })
            .collect()
    }
}

fn kept_weight(state: &[C64], keep: &[usize]) -> f64 {
    keep.iter().map(|&b| state[b].norm_sqr()).sum()
}

impl Program {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        let last = stages.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("empty program".into()))?;
        let n = stages[0].circuit.n_qubits();
        check_size(n)?;
        for (i, s) in stages.iter().enumerate() {
            if s.circuit.n_qubits() != n {
                return Err(Error::InvalidArgument("stages act on different qubit counts".into()));
            }
            if (i < last && s.keep.len() != 1) || s.keep.is_empty() {
                return Err(Error::InvalidArgument(format!("stage {i} has {} kept sets", s.keep.len())));
            }
            if s.keep.iter().flatten().any(|&b| b >> n != 0) {
                return Err(Error::InvalidArgument("kept basis index out of range".into()));
            }
        }
        let mut offsets = vec![0];
        for s in &stages {
            offsets.push(offsets.last().unwrap() + s.circuit.len());
        }
        Ok(Self { n, stages, offsets })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Survival probability after each inner stage, then the probability of
    /// each kept set of the last stage (all cumulative).
    pub fn n_events(&self) -> usize {
        self.stages.len() - 1 + self.stages.last().unwrap().keep.len()
    }

    pub fn to_native(&self) -> Result<Program> {
        let stages = self
            .stages
            .iter()
            .map(|s| Ok(Stage { circuit: to_native(&s.circuit)?, keep: s.keep.clone() }))
            .collect::<Result<Vec<_>>>()?;
        Program::new(stages)
    }

    fn gate(&self, global: usize) -> &Gate {
        let s = self.offsets.partition_point(|&o| o <= global) - 1;
        &self.stages[s].circuit.gates()[global - self.offsets[s]]
    }

    fn total_gates(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Ends stage `s`: records events and projects. Returns false once the
    /// kept branch is empty (remaining events are then zero).
    fn close_stage(&self, s: usize, state: &mut State, events: &mut Vec<f64>, q: &mut f64) -> bool {
        let keep = &self.stages[s].keep;
        if s + 1 == self.stages.len() {
            events.extend(keep.iter().map(|k| *q * kept_weight(state, k)));
            return true;
        }
        let p = kept_weight(state, &keep[0]);
        *q *= p;
        events.push(*q);
        if p <= 0.0 {
            events.resize(self.n_events(), 0.0);
            return false;
        }
        let f = 1.0 / p.sqrt();
        let mut next = vec![C64::new(0.0, 0.0); state.len()];
        for &b in &keep[0] {
            next[b] = state[b] * f;
        }
        *state = next;
        true
    }

    /// Runs from a checkpoint to the end; `hook(global, gate, state)` runs
    /// after every gate.
    fn run_from(&self, mut cp: Checkpoint, mut hook: impl FnMut(usize, &Gate, &mut State)) -> Vec<f64> {
        for s in cp.stage..self.stages.len() {
            let start = if s == cp.stage { cp.gate } else { 0 };
            for (i, g) in self.stages[s].circuit.gates().iter().enumerate().skip(start) {
                apply_gate(&mut cp.state, g);
                hook(self.offsets[s] + i, g, &mut cp.state);
            }
            if !self.close_stage(s, &mut cp.state, &mut cp.events, &mut cp.q) {
                break;
            }
        }
        cp.events
    }

    fn start(&self) -> Checkpoint {
        Checkpoint { stage: 0, gate: 0, state: zero_state(self.n), events: Vec::new(), q: 1.0 }
    }

    pub fn exact(&self) -> Vec<f64> {
        self.run_from(self.start(), |_, _, _| {})
    }

    /// Plain trajectory sampling: one fully noisy run per call.
    pub fn trajectory(&self, noise: &NoiseModel, rng: &mut impl Rng) -> Vec<f64> {
        let mut cp = self.start();
        for s in 0..self.stages.len() {
            for g in self.stages[s].circuit.gates() {
                noisy_gate(&mut cp.state, g, noise, rng);
            }
            if !self.close_stage(s, &mut cp.state, &mut cp.events, &mut cp.q) {
                break;
            }
        }
        cp.events
    }

    /// Noiseless states at evenly spaced gate positions and at stage starts.
    fn checkpoints(&self, max: usize) -> Vec<(usize, Checkpoint)> {
        let stride = self.total_gates().div_ceil(max.max(1)).max(1);
        let mut out = Vec::new();
        let mut cp = self.start();
        for s in 0..self.stages.len() {
            cp.stage = s;
            for (i, g) in self.stages[s].circuit.gates().iter().enumerate() {
                let global = self.offsets[s] + i;
                if i == 0 || global % stride == 0 {
                    cp.gate = i;
                    out.push((global, cp.clone()));
                }
                apply_gate(&mut cp.state, g);
            }
            if !self.close_stage(s, &mut cp.state, &mut cp.events, &mut cp.q) {
                break;
            }
        }
        out
    }

    /// Stratified estimate with `pool` faulty trajectories; expects native gates.
    pub fn stratified(&self, noise: &NoiseModel, pool: usize, seed: u64) -> Result<Stratified> {
        let clean = self.exact();
        let total = self.total_gates();
        let mut survive = Vec::with_capacity(total);
        let mut acc = 1.0;
        for g in 0..total {
            acc *= 1.0 - gate_error(self.gate(g), noise);
            survive.push(acc);
        }
        let no_error = acc;
        if no_error >= 1.0 || pool == 0 {
            return Ok(Stratified { clean, no_error, pool: Vec::new() });
        }
        // at most ~256 MiB of checkpoints
        let per = (16usize << self.n).max(1);
        let cps = self.checkpoints(((256usize << 20) / per).clamp(1, 64));
        let pool: Vec<Vec<f64>> = (0..pool as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = trajectory_rng(seed, t);
                // one draw per equal-mass slice of the first-fault law
                let u = (t as f64 + rng.gen::<f64>()) / pool as f64 * (1.0 - no_error);
                let first = survive.partition_point(|&s| 1.0 - s <= u).min(total - 1);
                let at = cps.partition_point(|(g, _)| *g <= first) - 1;
                let cp = cps[at].1.clone();
                self.run_from(cp, |g, gate, state| {
                    if g == first {
                        random_pauli(state, gate, &mut rng);
                    } else if g > first {
                        let e = gate_error(gate, noise);
                        if e > 0.0 && rng.gen::<f64>() < e {
                            random_pauli(state, gate, &mut rng);
                        }
                    }
                })
            })
            .collect();
        Ok(Stratified { clean, no_error, pool })
    }
}

/// Category probabilities from cumulative events: failure after each inner
/// stage, then each kept set of the last stage, then the last-stage rest.
pub fn categories(events: &[f64], n_stages: usize) -> Vec<f64> {
    let inner = n_stages - 1;
    let mut out = Vec::with_capacity(events.len() + 1);
    let mut prev = 1.0;
    for &q in &events[..inner] {
        out.push((prev - q).max(0.0));
        prev = q;
    }
    let last = &events[inner..];
    out.extend(last.iter().copied());
    out.push((prev - last.iter().sum::<f64>()).max(0.0));
    out
}

/// Multinomial counts by sequential binomials.
pub fn draw_counts(probs: &[f64], shots: u64, rng: &mut impl Rng) -> Vec<u64> {
    let mut left = shots;
    let mut mass: f64 = probs.iter().sum();
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        let k = if left == 0 || mass <= 0.0 {
            0
        } else {
            let frac = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, frac).map(|b| b.sample(rng)).unwrap_or(0)
        };
        out.push(k);
        left -= k;
        mass -= p;
    }
    out
}
