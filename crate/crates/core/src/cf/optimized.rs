//! C_F as one circuit. Every level shares one increment per axis: the low
//! (always zero) bits of a level-l slice are flipped to ones first, so a
//! plain +1 carries into bit L - l. The flips and the transfer cascade are
//! controlled on a thermometer code t_m = [lvl < m] kept in clean ancillas.

use std::f64::consts::FRAC_PI_3;

use crate::circuit::synth::{and_into, cc_ry, controlled_h, margolus, prepare_real_amplitudes, xor_cubes};
use crate::circuit::{value_controls, Circuit, Control, Gate};
use crate::encoding::{less_than_cubes, BlockEncoding, Cube};
use crate::fem::LevelSpec;
use crate::{Error, Result};

use super::{cf_subnorm_bound, local_unitary, orthogonal_gates, Piece, RegisterLayout};

/// Registers holding the thermometer code and the increment carries. Both
/// are clean outside the circuit.
pub const THERMO: &str = "th";
pub const CARRY: &str = "cy";

fn thermo_cubes(lvl: &[usize], m: usize) -> Vec<Cube> {
    less_than_cubes(lvl, m as u64)
}

fn is_literal(cubes: &[Cube]) -> bool {
    cubes.len() == 1 && cubes[0].len() == 1
}

fn scratch_need(cubes: &[Cube]) -> usize {
    cubes.iter().map(|c| c.len().saturating_sub(2)).max().unwrap_or(0)
}

/// Thermometer conditions t_1..t_{L-1} plus the gates computing the
/// non-literal ones into `th`.
struct Thermo {
    conds: Vec<Control>,
    compute: Vec<Gate>,
}

impl Thermo {
    fn new(lvl: &[usize], big: usize, th: &[usize], scratch: &[usize]) -> Result<Self> {
        let mut conds = Vec::with_capacity(big.saturating_sub(1));
        let mut compute = Vec::new();
        let mut next = 0;
        for m in 1..big {
            let cubes = thermo_cubes(lvl, m);
            if is_literal(&cubes) {
                conds.push(cubes[0][0]);
            } else {
                let q = th[next];
                next += 1;
                compute.extend(xor_cubes(&cubes, q, scratch)?);
                conds.push(Control::one(q));
            }
        }
        Ok(Self { conds, compute })
    }

    /// t_m for m in 1..L
    fn t(&self, m: usize) -> Control {
        self.conds[m - 1]
    }

    fn uncompute(&self) -> Vec<Gate> {
        self.compute.iter().rev().map(|g| g.inverse()).collect()
    }
}

fn widths(spec: &LevelSpec) -> (usize, usize) {
    let lay = RegisterLayout::new(spec);
    let lvl: Vec<usize> = (0..lay.lvl_width).collect();
    let big = spec.levels();
    let th = (1..big).filter(|&m| !is_literal(&thermo_cubes(&lvl, m))).count();
    let scratch = (1..big).map(|m| scratch_need(&thermo_cubes(&lvl, m))).max().unwrap_or(0);
    (th, (big - 1).max(scratch))
}

/// +1 on `x` (LSB first) controlled on `k`, carries in clean `cy`.
fn controlled_increment(k: usize, x: &[usize], cy: &[usize]) -> Vec<Gate> {
    let w = x.len();
    let mut out = Vec::new();
    if w == 1 {
        out.push(Gate::cx(k, x[0]));
        return out;
    }
    let stage = |i: usize| -> Vec<Gate> {
        let ctl = if i == 0 { k } else { cy[i - 1] };
        margolus(Control::one(ctl), Control::one(x[i]), cy[i])
    };
    for i in 0..w - 1 {
        out.extend(stage(i));
    }
    out.push(Gate::cx(cy[w - 2], x[w - 1]));
    for i in (0..w - 1).rev() {
        out.extend(stage(i).iter().rev().map(|g| g.inverse()));
        out.push(Gate::cx(if i == 0 { k } else { cy[i - 1] }, x[i]));
    }
    out
}

fn conj(c: Control, body: Vec<Gate>) -> Vec<Gate> {
    if c.on {
        return body;
    }
    let mut out = vec![Gate::x(c.qubit)];
    out.extend(body);
    out.push(Gate::x(c.qubit));
    out
}

/// W_T on (child bit c, k) when `t` fires: a Givens rotation between
/// |c=0,k=1> and |c=1,k=0> with cosine 1/2, then H on c.
fn controlled_transfer(t: Control, k: usize, c: usize) -> Vec<Gate> {
    let mut body = vec![Gate::cx(c, k)];
    body.extend(cc_ry(t.qubit, k, c, -2.0 * FRAC_PI_3));
    body.push(Gate::cx(c, k));
    body.extend(controlled_h(t.qubit, c));
    conj(t, body)
}

fn lvl_unprepare(lvl: &[usize], big: usize) -> Result<Vec<Gate>> {
    if big.is_power_of_two() {
        return Ok(lvl.iter().map(|&q| Gate::h(q)).collect());
    }
    let mut amps = vec![0.0; 1 << lvl.len()];
    amps[..big].fill(1.0 / (big as f64).sqrt());
    Ok(prepare_real_amplitudes(lvl, &amps)?.iter().rev().map(|g| g.inverse()).collect())
}

pub fn build_u_cf_optimized(spec: &LevelSpec) -> Result<BlockEncoding> {
    let big = spec.levels();
    let d = spec.d();
    let lay = RegisterLayout::new(spec);
    let (n_th, n_cy) = widths(spec);
    let mut c = Circuit::new();
    lay.declare(&mut c, true, true)?;
    for i in 0..d {
        c.add_register(&RegisterLayout::anc(i), 1, true)?;
    }
    if n_th > 0 {
        c.add_register(THERMO, n_th, true)?;
    }
    if n_cy > 0 {
        c.add_register(CARRY, n_cy, true)?;
    }
    let q = |name: &str| c.register(name).map(|r| r.qubits()).unwrap_or_default();
    let (lvl, s, th, cy) = (q("lvl"), q("s"), q(THERMO), q(CARRY));
    let j: Vec<Vec<usize>> = (0..d).map(|i| q(&RegisterLayout::j(i))).collect();
    let k: Vec<usize> = (0..d).map(|i| c.reg(&RegisterLayout::k(i)).unwrap().start).collect();
    let a: Vec<usize> = (0..d).map(|i| c.reg(&RegisterLayout::anc(i)).unwrap().start).collect();

    if d > 1 {
        let mut amps = vec![0.0; 1 << s.len()];
        amps[..d].fill(1.0 / (d as f64).sqrt());
        c.extend(prepare_real_amplitudes(&s, &amps)?)?;
    }
    let thermo = Thermo::new(&lvl, big, &th, &cy)?;
    c.extend(thermo.compute.clone())?;

    // [I; N] stack. Bit b lies below the level-l slice iff t_{L-b-1}.
    for i in 0..d {
        c.push(Gate::h(k[i]))?;
        for b in 0..big - 1 {
            c.push(Gate::x(j[i][b]).with_controls(&[Control::one(k[i]), thermo.t(big - b - 1)]))?;
        }
        c.extend(controlled_increment(k[i], &j[i], &cy))?;
    }

    if d == 1 {
        c.extend(orthogonal_gates(local_unitary(Piece::C), &[k[0], a[0]]))?;
    } else {
        let swap_in = local_unitary(Piece::C) * local_unitary(Piece::R).transpose();
        for i in 0..d {
            c.extend(orthogonal_gates(local_unitary(Piece::R), &[k[i], a[i]]))?;
            let ctl = value_controls(&s, i as u64);
            for g in orthogonal_gates(&swap_in, &[k[i], a[i]]) {
                c.push(g.with_controls(&ctl))?;
            }
        }
    }

    // transfer l' -> l'+1 for every level l = lvl + 1 <= l'
    for lp in 1..big {
        for i in 0..d {
            c.extend(controlled_transfer(thermo.t(lp), k[i], j[i][big - lp - 1]))?;
        }
    }
    c.extend(thermo.uncompute())?;
    c.extend(lvl_unprepare(&lvl, big)?)?;

    let gamma = (4.0 * d as f64 * big as f64).sqrt();
    Ok(BlockEncoding::from_parts(gamma, c, lay.input()?, lay.output())?.with_subnorm(Some(cf_subnorm_bound(spec))))
}

/// Clean scratch qubits `input_flag_gates` needs beyond the carries.
pub fn input_flag_scratch(spec: &LevelSpec) -> usize {
    let big = spec.levels();
    let extra = if big.is_power_of_two() { 0 } else { 2 };
    (big + extra).saturating_sub(widths(spec).1).max(1)
}

/// flag ^= [state lies in the input space of the optimized C_F], d = 1 only,
/// up to a diagonal phase (use in mirrored pairs). Relies on the clean
/// thermometer and carry registers of `c`; `scratch` must be clean and hold
/// `input_flag_scratch` qubits.
///
/// With j' the register after the low-bit flips and p_m = z j'_0 .. j'_{m-1},
/// z = [k = 0, a = 0], the predicate is
/// t_L z + t_L p_L + sum_{l<L} t_l (p_{L-l} + p_{L-l-1}) over GF(2).
pub fn input_flag_gates(spec: &LevelSpec, c: &Circuit, flag: usize, scratch: &[usize]) -> Result<Vec<Gate>> {
    if spec.d() != 1 {
        return Err(Error::InvalidArgument("the factored input flag covers d = 1 only".into()));
    }
    let big = spec.levels();
    let q = |name: &str| c.register(name).map(|r| r.qubits()).unwrap_or_default();
    let (lvl, th, j) = (q("lvl"), q(THERMO), q(&RegisterLayout::j(0)));
    let k = c.reg(&RegisterLayout::k(0))?.start;
    let a = c.reg(&RegisterLayout::anc(0))?.start;
    let mut pool = q(CARRY);
    pool.extend_from_slice(scratch);
    let pow2 = big.is_power_of_two();
    let need = big + if pow2 { 0 } else { 2 };
    if pool.len() < need {
        return Err(Error::InvalidArgument(format!("input flag needs {need} clean qubits, got {}", pool.len())));
    }
    let thermo = Thermo::new(&lvl, big, &th, &pool)?;
    let mut w = thermo.compute.clone();
    let p: Vec<usize> = pool[..big].to_vec();
    let valid = if pow2 {
        None
    } else {
        let t = pool[big];
        w.extend(xor_cubes(&less_than_cubes(&lvl, big as u64), t, &pool[big + 1..])?);
        Some(Control::one(t))
    };
    for b in 0..big - 1 {
        let t = thermo.t(big - b - 1);
        w.extend(conj(t, vec![Gate::cx(t.qubit, j[b])]));
    }
    w.extend(margolus(Control::zero(k), Control::zero(a), p[0]));
    for m in 1..big {
        w.extend(margolus(Control::one(p[m - 1]), Control::one(j[m - 1]), p[m]));
    }
    let pc = |m: usize| Control::one(p[m]);
    match valid {
        None => {
            w.push(Gate::cx(p[0], flag));
            w.extend(margolus(pc(big - 1), Control::one(j[big - 1]), flag));
        }
        Some(v) => {
            w.extend(margolus(v, pc(0), flag));
            w.extend(and_into(&[v, pc(big - 1), Control::one(j[big - 1])], flag, &pool[big + 1..])?);
        }
    }
    for l in 1..big {
        let t = thermo.t(l);
        w.extend(margolus(t, pc(big - l), flag));
        w.extend(margolus(t, pc(big - l - 1), flag));
    }
    Ok(w)
}
