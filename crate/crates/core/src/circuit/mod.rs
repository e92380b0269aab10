//! Gate-list IR over named registers. Qubit q has weight 2^q in a basis
//! index; registers are contiguous spans, least significant bit first.

pub mod decompose;
pub mod noise;
pub mod sim;
pub mod staged;
pub mod synth;

use std::fmt::Write as _;

use crate::{Error, Result, C64};

pub type Mat2 = [C64; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Control {
    pub qubit: usize,
    /// true: fires on |1>, false: fires on |0>
    pub on: bool,
}

impl Control {
    pub fn one(qubit: usize) -> Self {
        Self { qubit, on: true }
    }
    pub fn zero(qubit: usize) -> Self {
        Self { qubit, on: false }
    }
}

/// Controls selecting `value` on `qubits` (qubits[0] is the least significant bit).
pub fn value_controls(qubits: &[usize], value: u64) -> Vec<Control> {
    qubits
        .iter()
        .enumerate()
        .map(|(i, &q)| Control {
            qubit: q,
            on: (value >> i) & 1 == 1,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    X,
    Y,
    Z,
    H,
    Ry(f64),
    Rz(f64),
    /// diag(1, e^{i theta})
    Phase(f64),
    /// row-major 2x2 matrix
    U(Mat2),
    Swap,
    /// adds the amount modulo 2^n to the target register (targets LSB first)
    Add(i64),
    /// cyclic register shift: bit i of the result is bit (i + amount) mod n of the input
    Rotate(i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<Control>,
}

fn cplx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

pub fn mat_adjoint(a: &Mat2) -> Mat2 {
    [a[0].conj(), a[2].conj(), a[1].conj(), a[3].conj()]
}

impl GateKind {
    /// Matrix of single-target kinds.
    pub fn matrix(&self) -> Option<Mat2> {
        let z = cplx(0.0, 0.0);
        let o = cplx(1.0, 0.0);
        Some(match self {
            GateKind::X => [z, o, o, z],
            GateKind::Y => [z, cplx(0.0, -1.0), cplx(0.0, 1.0), z],
            GateKind::Z => [o, z, z, -o],
            GateKind::H => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                [cplx(s, 0.0), cplx(s, 0.0), cplx(s, 0.0), cplx(-s, 0.0)]
            }
            GateKind::Ry(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                [cplx(co, 0.0), cplx(-s, 0.0), cplx(s, 0.0), cplx(co, 0.0)]
            }
            GateKind::Rz(t) => [C64::from_polar(1.0, -t / 2.0), z, z, C64::from_polar(1.0, t / 2.0)],
            GateKind::Phase(t) => [o, z, z, C64::from_polar(1.0, *t)],
            GateKind::U(m) => *m,
            _ => return None,
        })
    }

    pub fn inverse(&self) -> GateKind {
        match self {
            GateKind::Ry(t) => GateKind::Ry(-t),
            GateKind::Rz(t) => GateKind::Rz(-t),
            GateKind::Phase(t) => GateKind::Phase(-t),
            GateKind::U(m) => GateKind::U(mat_adjoint(m)),
            GateKind::Add(a) => GateKind::Add(-a),
            GateKind::Rotate(a) => GateKind::Rotate(-a),
            k => k.clone(),
        }
    }

    fn param_string(&self) -> String {
        match self {
            GateKind::Ry(t) | GateKind::Rz(t) | GateKind::Phase(t) => format!("{t}"),
            GateKind::U(m) => m
                .iter()
                .map(|v| format!("{},{}", v.re, v.im))
                .collect::<Vec<_>>()
                .join(","),
            GateKind::Add(a) | GateKind::Rotate(a) => format!("{a}"),
            _ => String::new(),
        }
    }
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Self {
        Self {
            kind,
            targets,
            controls: Vec::new(),
        }
    }
    pub fn x(t: usize) -> Self {
        Self::new(GateKind::X, vec![t])
    }
    pub fn z(t: usize) -> Self {
        Self::new(GateKind::Z, vec![t])
    }
    pub fn h(t: usize) -> Self {
        Self::new(GateKind::H, vec![t])
    }
    pub fn ry(t: usize, theta: f64) -> Self {
        Self::new(GateKind::Ry(theta), vec![t])
    }
    pub fn rz(t: usize, theta: f64) -> Self {
        Self::new(GateKind::Rz(theta), vec![t])
    }
    pub fn phase(t: usize, theta: f64) -> Self {
        Self::new(GateKind::Phase(theta), vec![t])
    }
    pub fn u(t: usize, m: Mat2) -> Self {
        Self::new(GateKind::U(m), vec![t])
    }
    pub fn cx(ctrl: usize, t: usize) -> Self {
        Self::x(t).ctrl(ctrl)
    }
    pub fn swap(a: usize, b: usize) -> Self {
        Self::new(GateKind::Swap, vec![a, b])
    }
    pub fn add(targets: Vec<usize>, amount: i64) -> Self {
        Self::new(GateKind::Add(amount), targets)
    }
    pub fn rotate(targets: Vec<usize>, amount: i64) -> Self {
        Self::new(GateKind::Rotate(amount), targets)
    }

    pub fn ctrl(mut self, q: usize) -> Self {
        self.controls.push(Control::one(q));
        self
    }
    pub fn anti(mut self, q: usize) -> Self {
        self.controls.push(Control::zero(q));
        self
    }
    pub fn with_controls(mut self, cs: &[Control]) -> Self {
        self.controls.extend_from_slice(cs);
        self
    }

    pub fn inverse(&self) -> Gate {
        Gate {
            kind: self.kind.inverse(),
            targets: self.targets.clone(),
            controls: self.controls.clone(),
        }
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().copied().chain(self.controls.iter().map(|c| c.qubit))
    }

    pub fn name(&self) -> &'static str {
        match (&self.kind, self.controls.len()) {
            (GateKind::X, 0) => "X",
            (GateKind::X, 1) => "CX",
            (GateKind::X, 2) => "CCX",
            (GateKind::X, _) => "MCX",
            (GateKind::Y, _) => "Y",
            (GateKind::Z, _) => "Z",
            (GateKind::H, _) => "H",
            (GateKind::Ry(_), _) => "RY",
            (GateKind::Rz(_), _) => "RZ",
            (GateKind::Phase(_), _) => "P",
            (GateKind::U(_), _) => "U",
            (GateKind::Swap, _) => "SWAP",
            (GateKind::Add(_), _) => "INC",
            (GateKind::Rotate(_), _) => "SHIFT",
        }
    }

    /// Targets plus controls.
    pub fn arity(&self) -> usize {
        self.targets.len() + self.controls.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub start: usize,
    pub width: usize,
    pub ancilla: bool,
}

impl Register {
    pub fn qubits(&self) -> Vec<usize> {
        (self.start..self.start + self.width).collect()
    }
    pub fn qubit(&self, i: usize) -> usize {
        assert!(i < self.width, "bit {i} outside register {}", self.name);
        self.start + i
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Circuit {
    regs: Vec<Register>,
    gates: Vec<Gate>,
    n: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GateCounts {
    pub one_qubit: usize,
    pub two_qubit: usize,
    pub larger: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.one_qubit + self.two_qubit + self.larger
    }
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a register of `width` qubits; returns its first qubit.
    pub fn add_register(&mut self, name: &str, width: usize, ancilla: bool) -> Result<usize> {
        if width == 0 {
            return Err(Error::Register(format!("register {name} has zero width")));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Register(format!("bad register name {name:?}")));
        }
        if self.register(name).is_some() {
            return Err(Error::Register(format!("duplicate register {name}")));
        }
        let start = self.n;
        self.regs.push(Register {
            name: name.to_string(),
            start,
            width,
            ancilla,
        });
        self.n += width;
        Ok(start)
    }

    pub fn registers(&self) -> &[Register] {
        &self.regs
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.regs.iter().find(|r| r.name == name)
    }

    pub fn reg(&self, name: &str) -> Result<&Register> {
        self.register(name)
            .ok_or_else(|| Error::Register(format!("unknown register {name}")))
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        let mut seen = Vec::with_capacity(g.arity());
        for q in g.qubits() {
            if q >= self.n {
                return Err(Error::Register(format!("qubit {q} not declared ({} qubits)", self.n)));
            }
            if seen.contains(&q) {
                return Err(Error::Register(format!("qubit {q} used twice in {}", g.name())));
            }
            seen.push(q);
        }
        let single = g.kind.matrix().is_some();
        if single && g.targets.len() != 1 {
            return Err(Error::InvalidArgument(format!("{} takes one target", g.name())));
        }
        if matches!(g.kind, GateKind::Swap) && g.targets.len() != 2 {
            return Err(Error::InvalidArgument("SWAP takes two targets".into()));
        }
        if g.targets.is_empty() {
            return Err(Error::InvalidArgument("gate without targets".into()));
        }
        self.gates.push(g);
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = Gate>>(&mut self, gates: I) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Same registers, no gates.
    pub fn empty_like(&self) -> Circuit {
        Circuit {
            regs: self.regs.clone(),
            gates: Vec::new(),
            n: self.n,
        }
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            regs: self.regs.clone(),
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            n: self.n,
        }
    }

    /// Every gate additionally conditioned on `controls`.
    pub fn controlled(&self, controls: &[Control]) -> Circuit {
        Circuit {
            regs: self.regs.clone(),
            gates: self
                .gates
                .iter()
                .map(|g| g.clone().with_controls(controls))
                .collect(),
            n: self.n,
        }
    }

    #[cfg(test)]
    pub(crate) fn gates_mut(&mut self) -> &mut Vec<Gate> {
        &mut self.gates
    }

    pub fn counts(&self) -> GateCounts {
        let mut c = GateCounts::default();
        for g in &self.gates {
            match g.arity() {
                1 => c.one_qubit += 1,
                2 => c.two_qubit += 1,
                _ => c.larger += 1,
            }
        }
        c
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "QUBITS {}", self.n);
        for r in &self.regs {
            let _ = writeln!(
                s,
                "REG {} start={} width={}{}",
                r.name,
                r.start,
                r.width,
                if r.ancilla { " ancilla" } else { "" }
            );
        }
        let _ = writeln!(s, "BEGIN");
        for g in &self.gates {
            let t: Vec<String> = g.targets.iter().map(|q| q.to_string()).collect();
            let cs: Vec<String> = g
                .controls
                .iter()
                .map(|c| if c.on { c.qubit.to_string() } else { format!("~{}", c.qubit) })
                .collect();
            let _ = writeln!(
                s,
                "{} targets={} controls={} param={}",
                g.name(),
                t.join(","),
                cs.join(","),
                g.kind.param_string()
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Circuit> {
        let mut c = Circuit::new();
        let mut declared = None;
        let mut body = false;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |msg: &str| Error::Parse {
                line: no + 1,
                msg: msg.to_string(),
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            if !body {
                match head {
                    "QUBITS" => {
                        declared = Some(
                            parts
                                .next()
                                .and_then(|v| v.parse::<usize>().ok())
                                .ok_or_else(|| err("bad qubit count"))?,
                        )
                    }
                    "REG" => {
                        let name = parts.next().ok_or_else(|| err("missing register name"))?;
                        let mut start = None;
                        let mut width = None;
                        let mut anc = false;
                        for p in parts {
                            if let Some(v) = p.strip_prefix("start=") {
                                start = v.parse::<usize>().ok();
                            } else if let Some(v) = p.strip_prefix("width=") {
                                width = v.parse::<usize>().ok();
                            } else if p == "ancilla" {
                                anc = true;
                            }
                        }
                        let width = width.ok_or_else(|| err("missing width"))?;
                        let got = c.add_register(name, width, anc).map_err(|e| err(&e.to_string()))?;
                        if Some(got) != start {
                            return Err(err("register start does not follow declaration order"));
                        }
                    }
                    "BEGIN" => {
                        body = true;
                        if declared != Some(c.n) {
                            return Err(err("QUBITS does not match registers"));
                        }
                    }
                    _ => return Err(err("unexpected header line")),
                }
                continue;
            }
            let mut targets = Vec::new();
            let mut controls = Vec::new();
            let mut param = String::new();
            for p in parts {
                if let Some(v) = p.strip_prefix("targets=") {
                    for t in v.split(',').filter(|s| !s.is_empty()) {
                        targets.push(t.parse::<usize>().map_err(|_| err("bad target"))?);
                    }
                } else if let Some(v) = p.strip_prefix("controls=") {
                    for t in v.split(',').filter(|s| !s.is_empty()) {
                        let (on, q) = match t.strip_prefix('~') {
                            Some(q) => (false, q),
                            None => (true, t),
                        };
                        controls.push(Control {
                            qubit: q.parse::<usize>().map_err(|_| err("bad control"))?,
                            on,
                        });
                    }
                } else if let Some(v) = p.strip_prefix("param=") {
                    param = v.to_string();
                } else {
                    return Err(err("unknown field"));
                }
            }
            let f = |s: &str| s.parse::<f64>().map_err(|_| err("bad parameter"));
            let i = |s: &str| s.parse::<i64>().map_err(|_| err("bad parameter"));
            let kind = match head {
                "X" | "CX" | "CCX" | "MCX" => GateKind::X,
                "Y" => GateKind::Y,
                "Z" => GateKind::Z,
                "H" => GateKind::H,
                "RY" => GateKind::Ry(f(&param)?),
                "RZ" => GateKind::Rz(f(&param)?),
                "P" => GateKind::Phase(f(&param)?),
                "U" => {
                    let v: Vec<f64> = param.split(',').map(f).collect::<Result<_>>()?;
                    if v.len() != 8 {
                        return Err(err("U needs 8 numbers"));
                    }
                    GateKind::U([cplx(v[0], v[1]), cplx(v[2], v[3]), cplx(v[4], v[5]), cplx(v[6], v[7])])
                }
                "SWAP" => GateKind::Swap,
                "INC" => GateKind::Add(i(&param)?),
                "SHIFT" => GateKind::Rotate(i(&param)?),
                _ => return Err(err("unknown gate")),
            };
            c.push(Gate {
                kind,
                targets,
                controls,
            })
            .map_err(|e| err(&e.to_string()))?;
        }
        if !body {
            return Err(Error::Parse {
                line: 0,
                msg: "missing BEGIN".into(),
            });
        }
        Ok(c)
    }

    /// Copies `other`'s gates into `self`, mapping qubit q of `other` to `map[q]`.
    pub fn append_mapped(&mut self, other: &Circuit, map: &[usize]) -> Result<()> {
        for g in &other.gates {
            self.push(remap(g, map))?;
        }
        Ok(())
    }
}

pub fn remap(g: &Gate, map: &[usize]) -> Gate {
    Gate {
        kind: g.kind.clone(),
        targets: g.targets.iter().map(|&q| map[q]).collect(),
        controls: g
            .controls
            .iter()
            .map(|c| Control {
                qubit: map[c.qubit],
                on: c.on,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Circuit {
        let mut c = Circuit::new();
        c.add_register("a", 2, false).unwrap();
        c.add_register("anc", 1, true).unwrap();
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::ry(1, 0.25).anti(0)).unwrap();
        c.push(Gate::x(2).ctrl(0).ctrl(1)).unwrap();
        c.push(Gate::add(vec![0, 1], 1).ctrl(2)).unwrap();
        c.push(Gate::rotate(vec![0, 1, 2], -1)).unwrap();
        c.push(Gate::u(2, [cplx(0.6, 0.0), cplx(0.0, 0.8), cplx(0.0, 0.8), cplx(0.6, 0.0)]))
            .unwrap();
        c
    }

    #[test]
    fn dump_parse_roundtrip() {
        let c = sample();
        let text = c.dump();
        assert!(text.contains("CCX targets=2 controls=0,1 param="));
        assert!(text.contains("RY targets=1 controls=~0 param=0.25"));
        assert_eq!(Circuit::parse(&text).unwrap(), c);
    }

    #[test]
    fn push_validates() {
        let mut c = Circuit::new();
        c.add_register("q", 2, false).unwrap();
        assert!(c.push(Gate::x(2)).is_err());
        assert!(c.push(Gate::cx(1, 1)).is_err());
        assert!(c.add_register("q", 1, false).is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Circuit::parse("QUBITS 1\nREG q start=0 width=1\nBEGIN\nFOO targets=0\n").is_err());
        assert!(Circuit::parse("QUBITS 2\nREG q start=0 width=1\nBEGIN\n").is_err());
    }

    #[test]
    fn inverse_reverses() {
        let c = sample();
        let inv = c.inverse();
        assert_eq!(inv.gates().len(), c.gates().len());
        assert_eq!(inv.gates()[0].kind, GateKind::U(mat_adjoint(&match c.gates()[5].kind {
            GateKind::U(m) => m,
            _ => unreachable!(),
        })));
    }
}
