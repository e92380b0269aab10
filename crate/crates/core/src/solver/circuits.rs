//! Circuit realizations of p~(M) for a block encoding of M: QSVT from a phase
//! file, or a linear combination of the Chebyshev terms when no phases are
//! given. Both wrap the encoding circuit; its qubits keep their indices and
//! the extra registers are appended above them.

use std::path::Path;

use super::poly::ChebyshevPoly;
use crate::cf::{ceil_log2, input_flag_gates, input_flag_scratch, CARRY, THERMO};
use crate::circuit::synth::{prepare_real_amplitudes, sign_oracle, xor_cubes};
use crate::circuit::{Circuit, Control, Gate};
use crate::encoding::{fresh_name, less_than_cubes, BlockEncoding, Cube};
use crate::fem::LevelSpec;
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFile {
    pub phases: Vec<f64>,
    /// the realized block is p~ / scale
    pub scale: Option<f64>,
}

impl PhaseFile {
    /// One angle per line; `#` starts a comment, `# scale v` records the
    /// normalization the angles were fitted to.
    pub fn parse(text: &str) -> Result<Self> {
        let mut phases = Vec::new();
        let mut scale = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("scale") {
                    scale = Some(v.trim().parse::<f64>().map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            phases.push(line.parse::<f64>().map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?);
        }
        if phases.len() < 2 || phases.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "an odd polynomial needs an even number of angles, got {}",
                phases.len()
            )));
        }
        Ok(Self { phases, scale })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn j(&self) -> usize {
        (self.phases.len() - 2) / 2
    }

    /// Shipped angle sets, keyed by (K, J).
    pub fn builtin(k: usize, j: usize) -> Option<Self> {
        let text = match (k, j) {
            (27, 2) => include_str!("../../data/phases_k27_j2.txt"),
            (27, 3) => include_str!("../../data/phases_k27_j3.txt"),
            (27, 4) => include_str!("../../data/phases_k27_j4.txt"),
            (27, 14) => include_str!("../../data/phases_k27_j14.txt"),
            (197, 74) => include_str!("../../data/phases_k197_j74.txt"),
            _ => return None,
        };
        Some(Self::parse(text).expect("shipped phase file parses"))
    }
}

/// Flag computations for the two projections of an encoding. The gates may
/// leave a diagonal phase, so they are only used in mirrored pairs.
pub trait Reflector {
    fn scratch(&self) -> usize;
    fn in_flag(&self, c: &Circuit, flag: usize, scratch: &[usize]) -> Result<Vec<Gate>>;
    fn out_flag(&self, c: &Circuit, flag: usize, scratch: &[usize]) -> Result<Vec<Gate>>;
}

/// One multi-controlled X per indicator cube. No scratch, not native.
pub struct GenericReflector {
    in_cubes: Vec<Cube>,
    out_cubes: Vec<Cube>,
}

impl GenericReflector {
    pub fn new(enc: &BlockEncoding) -> Result<Self> {
        Ok(Self {
            in_cubes: enc.pi_in.indicator(&enc.circuit, &[])?,
            out_cubes: enc.pi_out.indicator(&enc.circuit, &[])?,
        })
    }
}

fn cube_gates(cubes: &[Cube], flag: usize) -> Vec<Gate> {
    cubes.iter().map(|cube| Gate::x(flag).with_controls(cube)).collect()
}

impl Reflector for GenericReflector {
    fn scratch(&self) -> usize {
        0
    }
    fn in_flag(&self, _: &Circuit, flag: usize, _: &[usize]) -> Result<Vec<Gate>> {
        Ok(cube_gates(&self.in_cubes, flag))
    }
    fn out_flag(&self, _: &Circuit, flag: usize, _: &[usize]) -> Result<Vec<Gate>> {
        Ok(cube_gates(&self.out_cubes, flag))
    }
}

/// Native flags for the optimized d = 1 encoding. The thermometer and carry
/// registers are clean between applications of U, so they are skipped in
/// the output test and lent out as scratch.
pub struct CfReflector {
    spec: LevelSpec,
    out_cubes: Vec<Cube>,
    carries: Vec<usize>,
    extra: usize,
}

impl CfReflector {
    pub fn new(spec: &LevelSpec, enc: &BlockEncoding) -> Result<Self> {
        let c = &enc.circuit;
        if spec.d() != 1 || c.register(CARRY).is_none() {
            return Err(Error::InvalidArgument("native reflections need the optimized d = 1 encoding".into()));
        }
        let q = |n: &str| c.register(n).map(|r| r.qubits()).unwrap_or_default();
        let carries = q(CARRY);
        let mut skip = carries.clone();
        skip.extend(q(THERMO));
        let out_cubes = enc.pi_out.indicator(c, &skip)?;
        let need = out_cubes.iter().map(|k| k.len().saturating_sub(2)).max().unwrap_or(0);
        let extra = input_flag_scratch(spec).max(need.saturating_sub(carries.len()));
        Ok(Self { spec: spec.clone(), out_cubes, carries, extra })
    }
}

impl Reflector for CfReflector {
    fn scratch(&self) -> usize {
        self.extra
    }
    fn in_flag(&self, c: &Circuit, flag: usize, scratch: &[usize]) -> Result<Vec<Gate>> {
        input_flag_gates(&self.spec, c, flag, scratch)
    }
    fn out_flag(&self, _: &Circuit, flag: usize, scratch: &[usize]) -> Result<Vec<Gate>> {
        let mut pool = self.carries.clone();
        pool.extend_from_slice(scratch);
        xor_cubes(&self.out_cubes, flag, &pool)
    }
}

/// Picks the native reflector when it applies.
pub fn reflector_for(spec: &LevelSpec, enc: &BlockEncoding) -> Result<Box<dyn Reflector>> {
    match CfReflector::new(spec, enc) {
        Ok(r) => Ok(Box::new(r)),
        Err(_) => Ok(Box::new(GenericReflector::new(enc)?)),
    }
}

/// A circuit whose block on (pi_out, pi_in) of the encoding, with every
/// appended qubit in |0>, is p~(M) / norm.
#[derive(Clone, Debug)]
pub struct PolyCircuit {
    pub circuit: Circuit,
    pub norm: f64,
    pub j: usize,
    /// qubits of the wrapped encoding are 0..enc_qubits
    pub enc_qubits: usize,
    /// uses of U and U† together
    pub queries: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    In,
    Out,
}

fn flag_gates(r: &dyn Reflector, side: Side, c: &Circuit, flag: usize, scratch: &[usize]) -> Result<Vec<Gate>> {
    match side {
        Side::In => r.in_flag(c, flag, scratch),
        Side::Out => r.out_flag(c, flag, scratch),
    }
}

fn mirrored(compute: Vec<Gate>, middle: Vec<Gate>) -> Vec<Gate> {
    let undo: Vec<Gate> = compute.iter().rev().map(Gate::inverse).collect();
    let mut out = compute;
    out.extend(middle);
    out.extend(undo);
    out
}

fn append(c: &mut Circuit, body: &Circuit) -> Result<()> {
    c.extend(body.gates().iter().cloned())
}

/// Fresh ancilla register; names avoid those already in the encoding.
fn ancilla(c: &mut Circuit, base: &str, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let name = fresh_name(base, &[c]);
    let s = c.add_register(&name, n, true)?;
    Ok((s..s + n).collect())
}

/// QSVT in the reflection convention of the phase file. The real part is
/// taken with a Hadamard-conjugated qubit `h` that negates every phase.
pub fn qsvt_circuit(enc: &BlockEncoding, phases: &PhaseFile, refl: &dyn Reflector) -> Result<PolyCircuit> {
    let psi = &phases.phases;
    let d = psi.len() - 1;
    let j = (d - 1) / 2;
    let norm = phases
        .scale
        .ok_or_else(|| Error::InvalidArgument("phase file lacks a '# scale' line".into()))?;
    let mut c = enc.circuit.empty_like();
    let h = ancilla(&mut c, "h", 1)?[0];
    let f = ancilla(&mut c, "flag", 1)?[0];
    let scr = ancilla(&mut c, "scr", refl.scratch())?;
    let u = enc.circuit.clone();
    let ud = enc.circuit.inverse();

    c.push(Gate::h(h))?;
    // the state starts inside pi_in and ends projected on pi_out, so the
    // outermost phases only touch h
    c.push(Gate::rz(h, -2.0 * psi[d]))?;
    for s in 0..d {
        append(&mut c, if s % 2 == 0 { &u } else { &ud })?;
        if s + 1 < d {
            let side = if s % 2 == 0 { Side::Out } else { Side::In };
            let kick = vec![Gate::cx(h, f), Gate::rz(f, 2.0 * psi[d - 1 - s]), Gate::cx(h, f)];
            let w = flag_gates(refl, side, &c, f, &scr)?;
            c.extend(mirrored(w, kick))?;
        }
    }
    c.push(Gate::rz(h, -2.0 * psi[0]))?;
    if j % 2 == 1 {
        let m = C64::new(-1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        c.push(Gate::u(h, [m, z, z, m]))?;
    }
    c.push(Gate::h(h))?;
    Ok(PolyCircuit { circuit: c, norm, j, enc_qubits: enc.n_qubits(), queries: d })
}

/// sum_j |c_j|/N sgn(c_j) t_{2j+1}: a selector prepared in sqrt(|c_j|/N)
/// turns on the first j reflection pairs of the alternating sequence.
pub fn lcu_circuit(enc: &BlockEncoding, poly: &ChebyshevPoly, refl: &dyn Reflector) -> Result<PolyCircuit> {
    let jj = poly.j;
    let norm = poly.abs_sum();
    let mut c = enc.circuit.empty_like();
    let w = ceil_log2(jj + 1).max(1);
    let sel = ancilla(&mut c, "sel", w)?;
    let f = ancilla(&mut c, "flag", 1)?[0];
    let g = ancilla(&mut c, "g", 1)?[0];
    let scr = ancilla(&mut c, "scr", refl.scratch())?;

    let mut amps = vec![0.0; 1 << w];
    for (a, cj) in amps.iter_mut().zip(&poly.coeffs) {
        *a = (cj.abs() / norm).sqrt();
    }
    let signs: Vec<f64> = poly.coeffs.iter().map(|v| v.signum()).chain(std::iter::repeat(1.0)).take(1 << w).collect();
    let prep = prepare_real_amplitudes(&sel, &amps)?;
    c.extend(prep.clone())?;
    c.extend(sign_oracle(&sel, &signs))?;

    let u = enc.circuit.clone();
    let ud = enc.circuit.inverse();
    append(&mut c, &u)?;
    for i in 1..=jj {
        // g = [sel >= i]
        let mut cubes: Vec<Cube> = vec![vec![]];
        cubes.extend(less_than_cubes(&sel, i as u64));
        let gset = cube_gates(&cubes, g);
        for (k, side) in [Side::Out, Side::In].into_iter().enumerate() {
            let flip = vec![Gate::x(f), Gate::z(f).ctrl(g), Gate::x(f)];
            let wgates = flag_gates(refl, side, &c, f, &scr)?;
            let mut compute = gset.clone();
            compute.extend(wgates);
            c.extend(mirrored(compute, flip))?;
            append(&mut c, if k == 0 { &ud } else { &u })?;
        }
    }
    c.extend(prep.iter().rev().map(Gate::inverse))?;
    Ok(PolyCircuit { circuit: c, norm, j: jj, enc_qubits: enc.n_qubits(), queries: 2 * jj + 1 })
}

/// Realization used by the pipeline: QSVT with phases, LCU otherwise.
pub fn poly_circuit(
    spec: &LevelSpec,
    enc: &BlockEncoding,
    poly: &ChebyshevPoly,
    phases: Option<&PhaseFile>,
) -> Result<PolyCircuit> {
    let refl = reflector_for(spec, enc)?;
    match phases {
        Some(p) => qsvt_circuit(enc, p, refl.as_ref()),
        None => lcu_circuit(enc, poly, refl.as_ref()),
    }
}

/// Basis indices (appended qubits zero) inside a projection of the encoding.
pub fn projected_basis(enc: &BlockEncoding, output: bool) -> Result<Vec<usize>> {
    if output {
        enc.pi_out.basis(&enc.circuit)
    } else {
        enc.pi_in.basis(&enc.circuit)
    }
}

/// Qubit map sending each register of `prep` to the same-named one of `target`.
pub fn map_by_name(prep: &Circuit, target: &Circuit) -> Result<Vec<usize>> {
    let mut map = vec![usize::MAX; prep.n_qubits()];
    for r in prep.registers() {
        let t = target.reg(&r.name)?;
        if t.width != r.width {
            return Err(Error::Register(format!("register {} has width {} here, {} there", r.name, t.width, r.width)));
        }
        for i in 0..r.width {
            map[r.start + i] = t.start + i;
        }
    }
    Ok(map)
}

pub fn append_prep(c: &mut Circuit, prep: &Circuit, controls: &[Control]) -> Result<()> {
    let map = map_by_name(prep, c)?;
    let mut tmp = c.empty_like();
    tmp.append_mapped(prep, &map)?;
    append(c, &tmp.controlled(controls))
}
