//! Lowering to the native set {CX, single-qubit U}. Multi-controlled X uses
//! dirty-ancilla Toffoli ladders when spare qubits exist and a square-root
//! recursion otherwise.

use super::{mat_adjoint, Circuit, Control, Gate, GateKind, Mat2};
use crate::{Result, C64};

const PI: f64 = std::f64::consts::PI;

fn is_identity(m: &Mat2) -> bool {
    let one = C64::new(1.0, 0.0);
    (m[0] - one).norm() < 1e-14 && m[1].norm() < 1e-14 && m[2].norm() < 1e-14 && (m[3] - one).norm() < 1e-14
}

struct Lower<'a> {
    out: Vec<Gate>,
    n: usize,
    _c: &'a Circuit,
}

impl Lower<'_> {
    fn one(&mut self, t: usize, m: Mat2) {
        if !is_identity(&m) {
            self.out.push(Gate::u(t, m));
        }
    }

    fn named(&mut self, t: usize, k: GateKind) {
        let m = k.matrix().unwrap();
        self.one(t, m);
    }

    fn cx(&mut self, c: usize, t: usize) {
        self.out.push(Gate::cx(c, t));
    }

    fn free_qubits(&self, busy: &[usize]) -> Vec<usize> {
        (0..self.n).filter(|q| !busy.contains(q)).collect()
    }

    fn toffoli(&mut self, a: usize, b: usize, t: usize) {
        let tg = GateKind::Phase(PI / 4.0);
        let td = GateKind::Phase(-PI / 4.0);
        self.named(t, GateKind::H);
        self.cx(b, t);
        self.named(t, td.clone());
        self.cx(a, t);
        self.named(t, tg.clone());
        self.cx(b, t);
        self.named(t, td.clone());
        self.cx(a, t);
        self.named(b, tg.clone());
        self.named(t, tg.clone());
        self.named(t, GateKind::H);
        self.cx(a, b);
        self.named(a, tg);
        self.named(b, td);
        self.cx(a, b);
    }

    /// X on t controlled on all of `cs` being |1>; `dirty` may be in any state.
    fn mcx(&mut self, cs: &[usize], t: usize, dirty: &[usize]) {
        let k = cs.len();
        match k {
            0 => self.named(t, GateKind::X),
            1 => self.cx(cs[0], t),
            2 => self.toffoli(cs[0], cs[1], t),
            _ if dirty.len() >= k - 2 => self.ladder(cs, t, &dirty[..k - 2]),
            _ if !dirty.is_empty() => {
                let b = dirty[0];
                let m1 = k.div_ceil(2);
                let (g1, g2) = cs.split_at(m1);
                let mut c2: Vec<usize> = g2.to_vec();
                c2.push(b);
                let mut d1: Vec<usize> = g2.to_vec();
                d1.push(t);
                d1.extend_from_slice(&dirty[1..]);
                let mut d2: Vec<usize> = g1.to_vec();
                d2.extend_from_slice(&dirty[1..]);
                for _ in 0..2 {
                    self.mcx(g1, b, &d1);
                    self.mcx(&c2, t, &d2);
                }
            }
            _ => {
                let x = GateKind::X.matrix().unwrap();
                self.mcu(cs, t, x);
            }
        }
    }

    fn ladder(&mut self, cs: &[usize], t: usize, a: &[usize]) {
        let k = cs.len();
        let top = |s: &mut Self| s.toffoli(cs[k - 1], a[k - 3], t);
        let down: Vec<(usize, usize, usize)> = (2..k - 1).rev().map(|i| (cs[i], a[i - 2], a[i - 1])).collect();
        for _ in 0..2 {
            top(self);
            for &(x, y, z) in &down {
                self.toffoli(x, y, z);
            }
            self.toffoli(cs[0], cs[1], a[0]);
            for &(x, y, z) in down.iter().rev() {
                self.toffoli(x, y, z);
            }
        }
    }

    /// U on t controlled on all of `cs` being |1>.
    fn mcu(&mut self, cs: &[usize], t: usize, m: Mat2) {
        match cs.len() {
            0 => self.one(t, m),
            1 => self.controlled_u(cs[0], t, m),
            k => {
                let v = sqrt2(&m);
                let last = cs[k - 1];
                let rest = &cs[..k - 1];
                let mut busy = rest.to_vec();
                busy.push(last);
                let dirty = self.free_qubits(&busy);
                self.controlled_u(last, t, v);
                self.mcx(rest, last, &dirty);
                self.controlled_u(last, t, mat_adjoint(&v));
                self.mcx(rest, last, &dirty);
                self.mcu(rest, t, v);
            }
        }
    }

    fn controlled_u(&mut self, c: usize, t: usize, m: Mat2) {
        if is_identity(&m) {
            return;
        }
        let x = GateKind::X.matrix().unwrap();
        if (0..4).all(|i| (m[i] - x[i]).norm() < 1e-14) {
            self.cx(c, t);
            return;
        }
        let (alpha, beta, gamma, delta) = zyz(&m);
        let rz = |t: f64| GateKind::Rz(t).matrix().unwrap();
        let ry = |t: f64| GateKind::Ry(t).matrix().unwrap();
        let a = super::mat_mul(&rz(beta), &ry(gamma / 2.0));
        let b = super::mat_mul(&ry(-gamma / 2.0), &rz(-(delta + beta) / 2.0));
        let cm = rz((delta - beta) / 2.0);
        self.one(t, cm);
        self.cx(c, t);
        self.one(t, b);
        self.cx(c, t);
        self.one(t, a);
        self.one(c, GateKind::Phase(alpha).matrix().unwrap());
    }

    fn with_polarity(&mut self, controls: &[Control], body: impl FnOnce(&mut Self, &[usize])) {
        let neg: Vec<usize> = controls.iter().filter(|c| !c.on).map(|c| c.qubit).collect();
        for &q in &neg {
            self.named(q, GateKind::X);
        }
        let qs: Vec<usize> = controls.iter().map(|c| c.qubit).collect();
        body(self, &qs);
        for &q in &neg {
            self.named(q, GateKind::X);
        }
    }

    fn cswap(&mut self, cs: &[usize], a: usize, b: usize) {
        self.cx(b, a);
        let mut c2 = cs.to_vec();
        c2.push(a);
        let mut busy = c2.clone();
        busy.push(b);
        let dirty = self.free_qubits(&busy);
        self.mcx(&c2, b, &dirty);
        self.cx(b, a);
    }

    fn gate(&mut self, g: &Gate) {
        match &g.kind {
            GateKind::X => {
                let t = g.targets[0];
                let mut busy: Vec<usize> = g.qubits().collect();
                busy.sort_unstable();
                let dirty = self.free_qubits(&busy);
                self.with_polarity(&g.controls, |s, cs| s.mcx(cs, t, &dirty));
            }
            GateKind::Swap => {
                let (a, b) = (g.targets[0], g.targets[1]);
                self.with_polarity(&g.controls, |s, cs| s.cswap(cs, a, b));
            }
            GateKind::Add(amount) => {
                let ts = g.targets.clone();
                let amount = *amount;
                self.with_polarity(&g.controls, |s, cs| {
                    let w = ts.len();
                    let steps = amount.rem_euclid(1i64 << w.min(62));
                    let (reps, down) = if steps <= (1i64 << w.min(62)) / 2 {
                        (steps, false)
                    } else {
                        ((1i64 << w) - steps, true)
                    };
                    for _ in 0..reps {
                        if down {
                            for &q in &ts {
                                s.named(q, GateKind::X);
                            }
                        }
                        for i in (0..w).rev() {
                            let mut c2 = cs.to_vec();
                            c2.extend_from_slice(&ts[..i]);
                            let mut busy = c2.clone();
                            busy.push(ts[i]);
                            let dirty = s.free_qubits(&busy);
                            s.mcx(&c2, ts[i], &dirty);
                        }
                        if down {
                            for &q in &ts {
                                s.named(q, GateKind::X);
                            }
                        }
                    }
                });
            }
            GateKind::Rotate(amount) => {
                let ts = g.targets.clone();
                let w = ts.len() as i64;
                let r = amount.rem_euclid(w);
                self.with_polarity(&g.controls, |s, cs| {
                    // right by one: swaps (0,1),(1,2),...
                    let (reps, left) = if r <= w / 2 { (r, false) } else { (w - r, true) };
                    for _ in 0..reps {
                        let pairs: Vec<usize> = (0..ts.len() - 1).collect();
                        let order: Vec<usize> = if left { pairs.into_iter().rev().collect() } else { pairs };
                        for i in order {
                            s.cswap(cs, ts[i], ts[i + 1]);
                        }
                    }
                });
            }
            k => {
                let m = k.matrix().unwrap();
                let t = g.targets[0];
                self.with_polarity(&g.controls, |s, cs| s.mcu(cs, t, m));
            }
        }
    }
}

/// U = e^{i alpha} Rz(beta) Ry(gamma) Rz(delta)
pub fn zyz(m: &Mat2) -> (f64, f64, f64, f64) {
    let det = m[0] * m[3] - m[1] * m[2];
    let alpha = det.arg() / 2.0;
    let ph = C64::from_polar(1.0, -alpha);
    let a = m[0] * ph;
    let b = m[2] * ph;
    let gamma = 2.0 * b.norm().atan2(a.norm());
    let (beta, delta) = if b.norm() < 1e-14 {
        (-2.0 * a.arg(), 0.0)
    } else if a.norm() < 1e-14 {
        (2.0 * b.arg(), 0.0)
    } else {
        (b.arg() - a.arg(), -a.arg() - b.arg())
    };
    (alpha, beta, gamma, delta)
}

/// A square root of a 2x2 unitary.
pub fn sqrt2(m: &Mat2) -> Mat2 {
    let det = m[0] * m[3] - m[1] * m[2];
    let s0 = det.sqrt();
    let tr = m[0] + m[3];
    let s = if (tr + 2.0 * s0).norm() >= (tr - 2.0 * s0).norm() { s0 } else { -s0 };
    let t = (tr + 2.0 * s).sqrt();
    [(m[0] + s) / t, m[1] / t, m[2] / t, (m[3] + s) / t]
}

/// Same registers, gates lowered to CX and single-qubit U.
pub fn to_native(c: &Circuit) -> Result<Circuit> {
    let mut l = Lower {
        out: Vec::new(),
        n: c.n_qubits(),
        _c: c,
    };
    for g in c.gates() {
        l.gate(g);
    }
    let mut out = c.empty_like();
    out.extend(l.out)?;
    Ok(out)
}

pub fn is_native(g: &Gate) -> bool {
    match g.kind {
        GateKind::X => g.controls.len() <= 1 && g.controls.iter().all(|c| c.on),
        _ => g.kind.matrix().is_some() && g.controls.is_empty(),
    }
}
