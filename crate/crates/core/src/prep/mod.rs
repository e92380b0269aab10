//! Preparation of |r>, |m> and the preconditioned |Fᵀr> from prefix tables of
//! squared amplitudes (Grover–Rudolph style), plus the hierarchical
//! inner-product helpers behind them.

mod function;
mod quadrature;

use std::fmt::Write as _;

use crate::cf::{ceil_log2, RegisterLayout};
use crate::circuit::synth::{sign_oracle, uniformly_controlled_ry};
use crate::circuit::{value_controls, Circuit, Gate};
use crate::fem::LevelSpec;
use crate::{Error, Result};

pub use function::FunctionSpec;
pub use quadrature::{half_hat_sums, inner_products};

/// g[k][x] = sum of squared amplitudes whose index starts with the k-bit prefix x.
#[derive(Clone, Debug)]
pub struct AmplitudeTable {
    bits: usize,
    g: Vec<Vec<f64>>,
    negative: Vec<usize>,
}

impl AmplitudeTable {
    pub fn from_amplitudes(amps: &[f64]) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::InvalidArgument("amplitude vector length must be a power of two".into()));
        }
        let bits = amps.len().trailing_zeros() as usize;
        let mut g = vec![amps.iter().map(|a| a * a).collect::<Vec<f64>>()];
        for _ in 0..bits {
            let prev = g.last().unwrap();
            g.push(prev.chunks(2).map(|c| c[0] + c[1]).collect());
        }
        g.reverse();
        if g[0][0] <= 0.0 {
            return Err(Error::InvalidArgument("all-zero amplitude vector".into()));
        }
        let negative = amps.iter().enumerate().filter(|(_, a)| **a < 0.0).map(|(i, _)| i).collect();
        Ok(Self { bits, g, negative })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn g(&self, k: usize) -> &[f64] {
        &self.g[k]
    }

    /// Euclidean norm of the tabulated vector.
    pub fn norm(&self) -> f64 {
        self.g[0][0].sqrt()
    }

    pub fn negatives(&self) -> &[usize] {
        &self.negative
    }

    /// max |g_{k-1}(x) - g_k(x0) - g_k(x1)| relative to g_0.
    pub fn consistency_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..=self.bits {
            for (x, &p) in self.g[k - 1].iter().enumerate() {
                worst = worst.max((p - self.g[k][2 * x] - self.g[k][2 * x + 1]).abs());
            }
        }
        worst / self.g[0][0]
    }

    /// Rotation angles for the k-th qubit; None where the parent weight is zero.
    pub fn angles(&self, k: usize) -> Vec<Option<f64>> {
        (0..1usize << (k - 1))
            .map(|x| {
                let parent = self.g[k - 1][x];
                (parent > 0.0).then(|| 2.0 * (self.g[k][2 * x] / parent).clamp(0.0, 1.0).sqrt().acos())
            })
            .collect()
    }

    /// Normalized signed amplitudes.
    pub fn amplitudes(&self) -> Vec<f64> {
        let n = self.norm();
        let mut a: Vec<f64> = self.g[self.bits].iter().map(|v| v.sqrt() / n).collect();
        for &i in &self.negative {
            a[i] = -a[i];
        }
        a
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,x,g_k\n");
        for (k, row) in self.g.iter().enumerate() {
            for (x, v) in row.iter().enumerate() {
                writeln!(s, "{k},{x},{v:.17e}").unwrap();
            }
        }
        s
    }
}

fn mc_cost(m: usize) -> usize {
    match m {
        0 => 0,
        1 => 2,
        2 => 8,
        _ => 16 * (m - 1),
    }
}

/// Rotation stage for prefix length k: either a uniformly controlled Ry, or a
/// common rotation plus corrections on the prefixes that differ, whichever
/// needs fewer CX. Prefixes with zero parent weight take any angle.
fn rotation_stage(angles: &[Option<f64>], controls: &[usize], target: usize) -> Vec<Gate> {
    let mut defined: Vec<f64> = angles.iter().flatten().copied().collect();
    if defined.is_empty() {
        return vec![];
    }
    defined.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (mut base, mut best, mut i) = (defined[0], 0, 0);
    while i < defined.len() {
        let j = defined[i..].iter().take_while(|v| (**v - defined[i]).abs() < 1e-12).count();
        if j > best {
            best = j;
            base = defined[i];
        }
        i += j;
    }
    let exceptions: Vec<(usize, f64)> = angles
        .iter()
        .enumerate()
        .filter_map(|(x, a)| a.filter(|v| (v - base).abs() >= 1e-12).map(|v| (x, v)))
        .collect();
    let ucry = if controls.is_empty() { 0 } else { 1 << controls.len() };
    if exceptions.len() * mc_cost(controls.len()) <= ucry {
        let mut out = Vec::new();
        if base.abs() > 1e-15 {
            out.push(Gate::ry(target, base));
        }
        for (x, v) in exceptions {
            out.push(Gate::ry(target, v - base).with_controls(&value_controls(controls, x as u64)));
        }
        out
    } else {
        let filled: Vec<f64> = angles.iter().map(|a| a.unwrap_or(base)).collect();
        uniformly_controlled_ry(controls, target, &filled)
    }
}

/// Gates mapping |0> to the tabulated state on `qubits` (qubits[0] least significant).
pub fn build_prep_gates(table: &AmplitudeTable, qubits: &[usize]) -> Result<Vec<Gate>> {
    let w = table.bits();
    if qubits.len() != w {
        return Err(Error::InvalidArgument("qubit count does not match the table".into()));
    }
    let mut out = Vec::new();
    for k in 1..=w {
        out.extend(rotation_stage(&table.angles(k), &qubits[w - k + 1..], qubits[w - k]));
    }
    if !table.negatives().is_empty() {
        let mut marks = vec![0.0; 1 << w];
        for &i in table.negatives() {
            marks[i] = -1.0;
        }
        out.extend(sign_oracle(qubits, &marks));
    }
    Ok(out)
}

pub fn build_prep_circuit(table: &AmplitudeTable) -> Result<Circuit> {
    let mut c = Circuit::new();
    c.add_register("q", table.bits(), false)?;
    let qs: Vec<usize> = (0..table.bits()).collect();
    c.extend(build_prep_gates(table, &qs)?)?;
    Ok(c)
}

#[derive(Clone, Debug)]
pub struct PreparedState {
    /// registers j_d..j_1 then lvl (if more than one level); basis index = padded index
    pub circuit: Circuit,
    pub table: AmplitudeTable,
    /// normalized, indexed by the register value
    pub amplitudes: Vec<f64>,
    /// Euclidean norm of the unnormalized vector
    pub norm: f64,
}

/// Frame-ordered vector (levels 1..L, nodes first axis most significant)
/// to the padded register index lvl * 2^{dL} + (j_1..j_d), level-l node
/// coordinates stored in the high l bits of each j register.
pub fn frame_to_padded(spec: &LevelSpec, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != spec.frame_dim() {
        return Err(Error::InvalidArgument("frame vector has the wrong length".into()));
    }
    let (d, big) = (spec.d(), spec.levels());
    let w = ceil_log2(big);
    let mut out = vec![0.0; 1 << (w + d * big)];
    for l in 1..=big {
        let off = spec.frame_offset(l);
        for (i, &x) in v[off..off + spec.dim_v(l)].iter().enumerate() {
            out[padded_index(spec, l, i)] = x;
        }
    }
    Ok(out)
}

pub fn padded_index(spec: &LevelSpec, l: usize, node: usize) -> usize {
    let (d, big) = (spec.d(), spec.levels());
    let per = (1usize << l) - 1;
    let mut rest = node;
    let mut idx = 0;
    for i in (0..d).rev() {
        idx |= ((rest % per) << (big - l)) << ((d - 1 - i) * big);
        rest /= per;
    }
    ((l - 1) << (d * big)) | idx
}

pub fn padded_to_frame(spec: &LevelSpec, p: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.frame_dim());
    for l in 1..=spec.levels() {
        out.extend((0..spec.dim_v(l)).map(|i| p[padded_index(spec, l, i)]));
    }
    out
}

/// Level-L nodal vector to the j-register index.
pub fn nodes_to_padded(spec: &LevelSpec, v: &[f64]) -> Vec<f64> {
    let (d, big) = (spec.d(), spec.levels());
    let mut out = vec![0.0; 1 << (d * big)];
    for (i, &x) in v.iter().enumerate() {
        out[padded_index(spec, big, i) & ((1 << (d * big)) - 1)] = x;
    }
    out
}

/// r_v = (Λ_v^{(L)}, f)
pub fn load_vector(f: &FunctionSpec, spec: &LevelSpec) -> Result<Vec<f64>> {
    inner_products(f, spec, spec.levels())
}

/// Fᵀr, level blocks 2^{-l(2-d)/2} (Λ^{(l)}, f).
pub fn preconditioned_load(f: &FunctionSpec, spec: &LevelSpec) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(spec.frame_dim());
    for l in 1..=spec.levels() {
        let s = spec.level_scale(l);
        out.extend(inner_products(f, spec, l)?.into_iter().map(|v| v * s));
    }
    Ok(out)
}

/// Euclidean norm of each level block of Fᵀr.
pub fn level_norms(f: &FunctionSpec, spec: &LevelSpec) -> Result<Vec<f64>> {
    (1..=spec.levels())
        .map(|l| {
            let s = spec.level_scale(l);
            Ok(inner_products(f, spec, l)?.iter().map(|v| v * v).sum::<f64>().sqrt() * s)
        })
        .collect()
}

fn prepared(c: Circuit, qubits: &[usize], padded: Vec<f64>) -> Result<PreparedState> {
    let table = AmplitudeTable::from_amplitudes(&padded)?;
    let mut c = c;
    c.extend(build_prep_gates(&table, qubits)?)?;
    let norm = table.norm();
    Ok(PreparedState {
        circuit: c,
        amplitudes: padded.iter().map(|v| v / norm).collect(),
        table,
        norm,
    })
}

/// j_d first so that the basis index equals the padded index.
fn declare_spatial(c: &mut Circuit, spec: &LevelSpec) -> Result<()> {
    for i in (0..spec.d()).rev() {
        c.add_register(&RegisterLayout::j(i), spec.levels(), false)?;
    }
    Ok(())
}

fn spatial_qubits(c: &Circuit, d: usize) -> Vec<usize> {
    (0..d).rev().flat_map(|i| c.reg(&RegisterLayout::j(i)).unwrap().qubits()).collect()
}

/// |r> on the j registers.
pub fn prep_load(f: &FunctionSpec, spec: &LevelSpec) -> Result<PreparedState> {
    let v = load_vector(f, spec)?;
    prep_nodal(spec, &v)
}

/// Any level-L nodal vector on the j registers.
pub fn prep_nodal(spec: &LevelSpec, v: &[f64]) -> Result<PreparedState> {
    let mut c = Circuit::new();
    declare_spatial(&mut c, spec)?;
    let qs = spatial_qubits(&c, spec.d());
    prepared(c, &qs, nodes_to_padded(spec, v))
}

/// |Fᵀr> on (lvl, j_1..j_d): level register first, then the spatial bits.
pub fn prep_preconditioned(f: &FunctionSpec, spec: &LevelSpec) -> Result<PreparedState> {
    let v = preconditioned_load(f, spec)?;
    prep_frame(spec, &v)
}

pub fn prep_frame(spec: &LevelSpec, v: &[f64]) -> Result<PreparedState> {
    let mut c = Circuit::new();
    declare_spatial(&mut c, spec)?;
    let w = ceil_log2(spec.levels());
    if w > 0 {
        c.add_register("lvl", w, false)?;
    }
    let mut qs = spatial_qubits(&c, spec.d());
    if w > 0 {
        qs.extend(c.reg("lvl")?.qubits());
    }
    prepared(c, &qs, frame_to_padded(spec, v)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_functions() {
        assert!(matches!("const:1".parse::<FunctionSpec>().unwrap(), FunctionSpec::Constant(c) if c == 1.0));
        let p: FunctionSpec = "poly:0,1".parse().unwrap();
        assert_eq!(p.eval(&[0.25]), 0.25);
        assert!("sin:1".parse::<FunctionSpec>().is_err());
        assert!("poly:".parse::<FunctionSpec>().is_err());
    }

    #[test]
    fn table_is_consistent() {
        let t = AmplitudeTable::from_amplitudes(&[0.1, -0.5, 0.0, 0.3, 0.2, 0.2, 0.0, 0.7]).unwrap();
        assert!(t.consistency_error() < 1e-15);
        assert_eq!(t.negatives(), &[1]);
        assert!(t.to_csv().starts_with("k,x,g_k\n0,0,"));
        assert!(AmplitudeTable::from_amplitudes(&[0.0; 4]).is_err());
    }

    #[test]
    fn padding_roundtrip() {
        let spec = LevelSpec::new(2, 3).unwrap();
        let v: Vec<f64> = (0..spec.frame_dim()).map(|i| i as f64 + 1.0).collect();
        let p = frame_to_padded(&spec, &v).unwrap();
        assert_eq!(padded_to_frame(&spec, &p), v);
        assert_eq!(p.iter().filter(|x| **x != 0.0).count(), v.len());
    }
}
