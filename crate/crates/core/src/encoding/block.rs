use nalgebra::DMatrix;
use rayon::prelude::*;

use super::projection::{fresh_name, Projection, Span};
use crate::circuit::sim::{basis_state, check_size, simulate};
use crate::circuit::synth::prepare_real_amplitudes;
use crate::circuit::{value_controls, Circuit, Control, Gate};
use crate::{Error, Result, C64};

pub const MAX_EXTRACT_QUBITS: usize = 22;

/// gamma * <pi_out| U |pi_in> is the encoded matrix.
#[derive(Clone, Debug)]
pub struct BlockEncoding {
    pub gamma: f64,
    pub circuit: Circuit,
    pub pi_in: Projection,
    pub pi_out: Projection,
    /// upper bound on gamma / ||encoded||; None when nothing useful is known
    pub subnorm_bound: Option<f64>,
    pub norm_hint: Option<f64>,
    pub cond_hint: Option<f64>,
}

impl BlockEncoding {
    pub fn from_parts(gamma: f64, circuit: Circuit, pi_in: Projection, pi_out: Projection) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("normalization {gamma} must be positive")));
        }
        pi_in.qubits(&circuit)?;
        pi_out.qubits(&circuit)?;
        Ok(Self {
            gamma,
            circuit,
            pi_in,
            pi_out,
            subnorm_bound: None,
            norm_hint: None,
            cond_hint: None,
        })
    }

    /// The full unitary, registers ordered so that the extracted matrix is U itself.
    pub fn encode_unitary(circuit: Circuit) -> Self {
        let pi = Projection::tensor(
            circuit
                .registers()
                .iter()
                .rev()
                .map(|r| Projection::full(Span::new(&r.name, 0, r.width)))
                .collect(),
        );
        Self {
            gamma: 1.0,
            circuit,
            pi_in: pi.clone(),
            pi_out: pi,
            subnorm_bound: Some(1.0),
            norm_hint: Some(1.0),
            cond_hint: Some(1.0),
        }
    }

    /// Identity on the leading `bound` values of each listed (name, width, bound)
    /// register, first listed most significant.
    pub fn identity(regs: &[(&str, usize, u64)]) -> Result<Self> {
        let mut c = Circuit::new();
        let mut fs = Vec::new();
        for &(name, width, bound) in regs {
            c.add_register(name, width, false)?;
            fs.push(Projection::range(Span::new(name, 0, width), bound)?);
        }
        let pi = Projection::tensor(fs);
        Ok(Self {
            gamma: 1.0,
            circuit: c,
            pi_in: pi.clone(),
            pi_out: pi,
            subnorm_bound: Some(1.0),
            norm_hint: Some(1.0),
            cond_hint: Some(1.0),
        })
    }

    pub fn rows(&self) -> usize {
        self.pi_out.dim()
    }

    pub fn cols(&self) -> usize {
        self.pi_in.dim()
    }

    pub fn n_qubits(&self) -> usize {
        self.circuit.n_qubits()
    }

    pub fn with_subnorm(mut self, s: Option<f64>) -> Self {
        self.subnorm_bound = s;
        self
    }

    pub fn with_norm_hint(mut self, norm: f64) -> Self {
        self.norm_hint = Some(norm);
        if norm > 0.0 {
            self.subnorm_bound = Some(self.gamma / norm);
        }
        self
    }

    pub fn with_cond_hint(mut self, k: f64) -> Self {
        self.cond_hint = Some(k);
        self
    }

    /// Encodes c * M by changing only the normalization.
    pub fn scaled(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {c} must be positive")));
        }
        self.gamma *= c;
        self.norm_hint = self.norm_hint.map(|n| n * c);
        Ok(self)
    }

    pub fn permute_in(mut self, order: &[usize]) -> Result<Self> {
        self.pi_in = self.pi_in.permuted(order)?;
        Ok(self)
    }

    pub fn permute_out(mut self, order: &[usize]) -> Result<Self> {
        self.pi_out = self.pi_out.permuted(order)?;
        Ok(self)
    }

    /// gamma * Pi_out U Pi_in^T, one simulated column per admissible input.
    pub fn extract_matrix(&self) -> Result<DMatrix<C64>> {
        let n = self.circuit.n_qubits();
        if n > MAX_EXTRACT_QUBITS {
            return Err(Error::TooLarge {
                what: "qubits for matrix extraction",
                value: n,
                limit: MAX_EXTRACT_QUBITS,
            });
        }
        check_size(n)?;
        let cols = self.pi_in.basis(&self.circuit)?;
        let rows = self.pi_out.basis(&self.circuit)?;
        let data: Vec<Vec<C64>> = cols
            .par_iter()
            .map(|&b| {
                let s = simulate(&self.circuit, &basis_state(n, b))?;
                Ok(rows.iter().map(|&r| s[r] * self.gamma).collect())
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| data[j][i]))
    }

    pub fn extract_real(&self) -> Result<DMatrix<f64>> {
        Ok(self.extract_matrix()?.map(|z| z.re))
    }
}

/// Merges the register tables of `a` and `b`. Same-named registers are shared
/// unless `rename` is set, in which case clashing ancillas of `b` get fresh
/// names and clashing data registers are an error. Returns the merged layout
/// (no gates) and the qubit map for `b`.
fn merge(a: &Circuit, b: &Circuit, rename: bool) -> Result<(Circuit, Vec<usize>)> {
    let mut m = a.empty_like();
    let mut map = vec![0; b.n_qubits()];
    for r in b.registers() {
        let start = match a.register(&r.name) {
            Some(ex) if ex.ancilla != r.ancilla || ex.width != r.width && !(rename && r.ancilla) => {
                return Err(Error::Register(format!(
                    "register {} has incompatible declarations",
                    r.name
                )))
            }
            Some(_) if rename && r.ancilla => {
                let name = fresh_name(&r.name, &[&m, b]);
                m.add_register(&name, r.width, true)?
            }
            Some(_) if rename => {
                return Err(Error::Register(format!(
                    "data register {} appears in both tensor factors",
                    r.name
                )))
            }
            Some(ex) => ex.start,
            None => m.add_register(&r.name, r.width, r.ancilla)?,
        };
        for i in 0..r.width {
            map[r.start + i] = start + i;
        }
    }
    Ok((m, map))
}

fn merge_all(cs: &[&Circuit]) -> Result<(Circuit, Vec<Vec<usize>>)> {
    let mut m = Circuit::new();
    let mut maps = Vec::with_capacity(cs.len());
    for c in cs {
        let (next, map) = merge(&m, c, false)?;
        m = next;
        maps.push(map);
    }
    // earlier maps stay valid: merging only appends registers
    Ok((m, maps))
}

fn identity_map(c: &Circuit) -> Vec<usize> {
    (0..c.n_qubits()).collect()
}

fn product(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? * b?)
}

fn check_name_free(name: &str, cs: &[&Circuit]) -> Result<()> {
    if cs.iter().any(|c| c.register(name).is_some()) {
        return Err(Error::Register(format!("selector name {name} already in use")));
    }
    Ok(())
}

fn width_for(n: usize) -> usize {
    (usize::BITS - (n.max(2) - 1).leading_zeros()) as usize
}

/// A (x) B with A most significant.
pub fn tensor(a: &BlockEncoding, b: &BlockEncoding) -> Result<BlockEncoding> {
    let (mut c, map) = merge(&a.circuit, &b.circuit, true)?;
    c.append_mapped(&a.circuit, &identity_map(&a.circuit))?;
    c.append_mapped(&b.circuit, &map)?;
    Ok(BlockEncoding {
        gamma: a.gamma * b.gamma,
        circuit: c,
        pi_in: Projection::tensor(vec![a.pi_in.clone(), b.pi_in.clone()]),
        pi_out: Projection::tensor(vec![a.pi_out.clone(), b.pi_out.clone()]),
        subnorm_bound: product(a.subnorm_bound, b.subnorm_bound),
        norm_hint: product(a.norm_hint, b.norm_hint),
        cond_hint: product(a.cond_hint, b.cond_hint),
    })
}

pub fn adjoint(a: &BlockEncoding) -> BlockEncoding {
    BlockEncoding {
        gamma: a.gamma,
        circuit: a.circuit.inverse(),
        pi_in: a.pi_out.clone(),
        pi_out: a.pi_in.clone(),
        subnorm_bound: a.subnorm_bound,
        norm_hint: a.norm_hint,
        cond_hint: a.cond_hint,
    }
}

/// diag(A, B); the branch with the smaller normalization is damped by a
/// controlled rotation on a fresh ancilla.
pub fn block_diag(a: &BlockEncoding, b: &BlockEncoding) -> Result<BlockEncoding> {
    let (mut c, mb) = merge(&a.circuit, &b.circuit, false)?;
    let sel_name = fresh_name("sel", &[&c]);
    let sel = c.add_register(&sel_name, 1, false)?;
    let gamma = a.gamma.max(b.gamma);
    let (small, small_gamma) = if a.gamma < b.gamma { (0, a.gamma) } else { (1, b.gamma) };
    if small_gamma < gamma {
        let damp = c.add_register(&fresh_name("damp", &[&c]), 1, true)?;
        let theta = 2.0 * (small_gamma / gamma).clamp(-1.0, 1.0).acos();
        let g = Gate::ry(damp, theta).with_controls(&[Control { qubit: sel, on: small == 1 }]);
        c.push(g)?;
    }
    for (enc, map, on) in [(a, identity_map(&a.circuit), false), (b, mb, true)] {
        for g in enc.circuit.gates() {
            c.push(crate::circuit::remap(g, &map).with_controls(&[Control { qubit: sel, on }]))?;
        }
    }
    let span = Span::new(&sel_name, 0, 1);
    let norm_lower = |e: &BlockEncoding| e.subnorm_bound.map(|s| e.gamma / s);
    let subnorm = match (norm_lower(a), norm_lower(b)) {
        (Some(x), Some(y)) if x.max(y) > 0.0 => Some(gamma / x.max(y)),
        _ => None,
    };
    let norm_hint = match (a.norm_hint, b.norm_hint) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    };
    Ok(BlockEncoding {
        gamma,
        circuit: c,
        pi_in: Projection::select(span.clone(), vec![a.pi_in.clone(), b.pi_in.clone()])?,
        pi_out: Projection::select(span, vec![a.pi_out.clone(), b.pi_out.clone()])?,
        subnorm_bound: subnorm,
        norm_hint,
        cond_hint: None,
    })
}

/// [A_0 A_1 ... A_{n-1}] with column blocks indexed by a new register `selector`.
pub fn hconcat(parts: &[BlockEncoding], selector: &str) -> Result<BlockEncoding> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("hconcat of nothing".into()));
    }
    if parts.len() == 1 {
        return Ok(parts[0].clone());
    }
    let out = &parts[0].pi_out;
    if parts.iter().any(|p| p.pi_out != *out) {
        return Err(Error::Incompatible("hconcat needs equal row projections".into()));
    }
    let circuits: Vec<&Circuit> = parts.iter().map(|p| &p.circuit).collect();
    check_name_free(selector, &circuits)?;
    let (mut c, maps) = merge_all(&circuits)?;
    let w = width_for(parts.len());
    let sel0 = c.add_register(selector, w, false)?;
    let sq: Vec<usize> = (sel0..sel0 + w).collect();
    for (i, (p, map)) in parts.iter().zip(&maps).enumerate() {
        let ctl = value_controls(&sq, i as u64);
        for g in p.circuit.gates() {
            c.push(crate::circuit::remap(g, map).with_controls(&ctl))?;
        }
    }
    let gamma = parts.iter().map(|p| p.gamma * p.gamma).sum::<f64>().sqrt();
    let mut amps = vec![0.0; 1 << w];
    for (i, p) in parts.iter().enumerate() {
        amps[i] = p.gamma / gamma;
    }
    let prep = prepare_real_amplitudes(&sq, &amps)?;
    c.extend(prep.iter().rev().map(Gate::inverse))?;

    let lowers: Option<Vec<f64>> = parts.iter().map(|p| p.subnorm_bound.map(|s| p.gamma / s)).collect();
    let subnorm = lowers.and_then(|l| {
        let top = l.iter().cloned().fold(0.0, f64::max);
        if top <= 0.0 {
            return None;
        }
        let quad = parts
            .iter()
            .map(|p| p.subnorm_bound.unwrap().powi(2))
            .sum::<f64>()
            .sqrt();
        Some((gamma / top).min(quad))
    });
    Ok(BlockEncoding {
        gamma,
        circuit: c,
        pi_in: Projection::select(
            Span::new(selector, 0, w),
            parts.iter().map(|p| p.pi_in.clone()).collect(),
        )?,
        pi_out: out.clone(),
        subnorm_bound: subnorm,
        norm_hint: None,
        cond_hint: None,
    })
}

/// Vertical stack [A_0; A_1; ...].
pub fn vstack(parts: &[BlockEncoding], selector: &str) -> Result<BlockEncoding> {
    let adj: Vec<BlockEncoding> = parts.iter().map(adjoint).collect();
    Ok(adjoint(&hconcat(&adj, selector)?))
}

/// mu_a A + mu_b B.
pub fn add(mu_a: f64, a: &BlockEncoding, mu_b: f64, b: &BlockEncoding) -> Result<BlockEncoding> {
    if a.pi_in != b.pi_in || a.pi_out != b.pi_out {
        return Err(Error::Incompatible("add needs matching projections".into()));
    }
    let wa = mu_a.abs() * a.gamma;
    let wb = mu_b.abs() * b.gamma;
    let gamma = wa + wb;
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("add with both weights zero".into()));
    }
    let (mut c, mb) = merge(&a.circuit, &b.circuit, false)?;
    let sel_name = fresh_name("sum", &[&c]);
    let sel = c.add_register(&sel_name, 1, true)?;
    let theta = 2.0 * wb.sqrt().atan2(wa.sqrt());
    c.push(Gate::ry(sel, theta))?;
    for (enc, map, on) in [(a, identity_map(&a.circuit), false), (b, mb, true)] {
        for g in enc.circuit.gates() {
            c.push(crate::circuit::remap(g, &map).with_controls(&[Control { qubit: sel, on }]))?;
        }
    }
    match (mu_a < 0.0, mu_b < 0.0) {
        (false, false) => {}
        (true, true) => {
            // global sign: flip both branches
            c.push(Gate::z(sel))?;
            c.push(Gate::x(sel))?;
            c.push(Gate::z(sel))?;
            c.push(Gate::x(sel))?;
        }
        (false, true) => c.push(Gate::z(sel))?,
        (true, false) => {
            c.push(Gate::x(sel))?;
            c.push(Gate::z(sel))?;
            c.push(Gate::x(sel))?;
        }
    }
    c.push(Gate::ry(sel, -theta))?;
    let norm_hint = None;
    Ok(BlockEncoding {
        gamma,
        circuit: c,
        pi_in: a.pi_in.clone(),
        pi_out: a.pi_out.clone(),
        subnorm_bound: None,
        norm_hint,
        cond_hint: None,
    })
}

/// A B via a flag qubit that records whether U_B left the A-input subspace.
pub fn multiply(a: &BlockEncoding, b: &BlockEncoding) -> Result<BlockEncoding> {
    if a.pi_in != b.pi_out {
        return Err(Error::Incompatible(
            "multiply needs the input projection of A to equal the output projection of B".into(),
        ));
    }
    let (mut c, mb) = merge(&a.circuit, &b.circuit, false)?;
    let flag = c.add_register(&fresh_name("flag", &[&c]), 1, true)?;
    c.append_mapped(&b.circuit, &mb)?;
    let check = a.pi_in.cnot_pi_gates(&c, flag)?;
    c.extend(check)?;
    c.push(Gate::x(flag))?;
    c.append_mapped(&a.circuit, &identity_map(&a.circuit))?;

    let tall = |e: &BlockEncoding| e.rows() >= e.cols();
    let both = product(a.subnorm_bound, b.subnorm_bound);
    let via_a = if tall(a) { a.cond_hint } else { None };
    let via_b = if b.rows() <= b.cols() { b.cond_hint } else { None };
    let k = match (via_a, via_b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    let cond_hint = if (tall(a) && tall(b)) || (!tall(a) && !tall(b)) || a.rows() == a.cols() {
        product(a.cond_hint, b.cond_hint)
    } else {
        None
    };
    Ok(BlockEncoding {
        gamma: a.gamma * b.gamma,
        circuit: c,
        pi_in: b.pi_in.clone(),
        pi_out: a.pi_out.clone(),
        subnorm_bound: product(both, k),
        norm_hint: None,
        cond_hint,
    })
}

/// Block diagonal with blocks from `oracle(j)`, j = 0..count, selected by the
/// value of the registers in `selector` (first listed most significant).
/// All blocks must share normalization and projections.
pub fn controlled_block_diag(
    selector: &[(&str, usize)],
    count: usize,
    oracle: impl Fn(usize) -> Result<BlockEncoding> + Sync,
) -> Result<BlockEncoding> {
    if selector.is_empty() || count == 0 {
        return Err(Error::InvalidArgument("empty selector".into()));
    }
    let total_w: usize = selector.iter().map(|s| s.1).sum();
    if total_w >= usize::BITS as usize || count > 1 << total_w {
        return Err(Error::InvalidArgument("selector too narrow".into()));
    }
    if selector.len() > 1 && count != 1 << total_w {
        return Err(Error::InvalidArgument(
            "multi-register selectors must be fully populated".into(),
        ));
    }
    let blocks: Vec<BlockEncoding> = (0..count).into_par_iter().map(&oracle).collect::<Result<_>>()?;
    let first = &blocks[0];
    for bl in &blocks {
        for &(name, _) in selector {
            if bl.circuit.register(name).is_some() {
                return Err(Error::Register(format!("block circuit acts on selector register {name}")));
            }
        }
        if (bl.gamma - first.gamma).abs() > 1e-12 * first.gamma {
            return Err(Error::Incompatible("blocks have different normalizations".into()));
        }
        if bl.pi_in != first.pi_in || bl.pi_out != first.pi_out {
            return Err(Error::Incompatible("blocks have different projections".into()));
        }
    }
    let circuits: Vec<&Circuit> = blocks.iter().map(|b| &b.circuit).collect();
    let (mut c, maps) = merge_all(&circuits)?;
    let mut sq = Vec::new();
    let mut fs = Vec::new();
    for &(name, w) in selector {
        let s = c.add_register(name, w, false)?;
        sq.push((s, w));
        fs.push(if selector.len() == 1 {
            Projection::range(Span::new(name, 0, w), count as u64)?
        } else {
            Projection::full(Span::new(name, 0, w))
        });
    }
    let sel_qubits: Vec<usize> = sq.iter().rev().flat_map(|&(s, w)| s..s + w).collect();
    for (j, (bl, map)) in blocks.iter().zip(&maps).enumerate() {
        let ctl = value_controls(&sel_qubits, j as u64);
        for g in bl.circuit.gates() {
            c.push(crate::circuit::remap(g, map).with_controls(&ctl))?;
        }
    }
    let hints: Option<Vec<f64>> = blocks.iter().map(|b| b.norm_hint).collect();
    let norm_hint = hints.map(|h| h.into_iter().fold(0.0, f64::max));
    let sel_proj = Projection::tensor(fs);
    Ok(BlockEncoding {
        gamma: first.gamma,
        circuit: c,
        pi_in: Projection::tensor(vec![sel_proj.clone(), first.pi_in.clone()]),
        pi_out: Projection::tensor(vec![sel_proj, first.pi_out.clone()]),
        subnorm_bound: norm_hint.filter(|&n| n > 0.0).map(|n| first.gamma / n),
        norm_hint,
        cond_hint: None,
    })
}
