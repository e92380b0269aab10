//! Subset-of-basis projections described as products/selections of
//! per-register integer ranges. Qubits a projection does not mention are
//! required to be |0>.

use std::collections::BTreeMap;

use crate::circuit::{Circuit, Control, Gate};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Span {
    pub reg: String,
    pub offset: usize,
    pub width: usize,
}

impl Span {
    pub fn new(reg: &str, offset: usize, width: usize) -> Self {
        Self {
            reg: reg.to_string(),
            offset,
            width,
        }
    }

    pub fn full(c: &Circuit, reg: &str) -> Result<Self> {
        Ok(Self::new(reg, 0, c.reg(reg)?.width))
    }

    /// Qubits least significant first.
    pub fn qubits(&self, c: &Circuit) -> Result<Vec<usize>> {
        let r = c.reg(&self.reg)?;
        if self.offset + self.width > r.width {
            return Err(Error::Register(format!(
                "span {}[{}..{}] exceeds width {}",
                self.reg,
                self.offset,
                self.offset + self.width,
                r.width
            )));
        }
        Ok((0..self.width).map(|i| r.start + self.offset + i).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    /// value on the span lies in [0, bound)
    Range { span: Span, bound: u64 },
    /// first factor is the most significant part of the index
    Tensor(Vec<Projection>),
    /// selector value b picks branch b; index offset by the earlier branch dimensions
    Select { selector: Span, branches: Vec<Projection> },
}

pub type Cube = Vec<Control>;

impl Projection {
    pub fn range(span: Span, bound: u64) -> Result<Self> {
        if bound == 0 || (span.width < 64 && bound > 1u64 << span.width) {
            return Err(Error::InvalidArgument(format!(
                "bound {bound} invalid for a {}-qubit span",
                span.width
            )));
        }
        Ok(if bound == 1 {
            Projection::Tensor(vec![])
        } else {
            Projection::Range { span, bound }
        })
    }

    pub fn full(span: Span) -> Self {
        let b = 1u64 << span.width;
        Self::range(span, b).expect("full range is valid")
    }

    /// All mentioned qubits zero: a one-dimensional projection.
    pub fn zero() -> Self {
        Projection::Tensor(vec![])
    }

    pub fn tensor(factors: Vec<Projection>) -> Self {
        let mut flat = Vec::new();
        for f in factors {
            match f {
                Projection::Tensor(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Projection::Tensor(flat)
        }
    }

    pub fn select(selector: Span, branches: Vec<Projection>) -> Result<Self> {
        let n = branches.len() as u64;
        if n == 0 || (selector.width < 64 && n > 1u64 << selector.width) {
            return Err(Error::InvalidArgument("selector too narrow for branches".into()));
        }
        if branches.iter().all(|b| *b == branches[0]) {
            let first = branches[0].clone();
            return Ok(Self::tensor(vec![Self::range(selector, n)?, first]));
        }
        Ok(Projection::Select { selector, branches })
    }

    pub fn dim(&self) -> usize {
        match self {
            Projection::Range { bound, .. } => *bound as usize,
            Projection::Tensor(fs) => fs.iter().map(|f| f.dim()).product(),
            Projection::Select { branches, .. } => branches.iter().map(|b| b.dim()).sum(),
        }
    }

    pub fn registers(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit_spans(&mut |s| {
            if !out.contains(&s.reg) {
                out.push(s.reg.clone());
            }
        });
        out
    }

    fn visit_spans(&self, f: &mut impl FnMut(&Span)) {
        match self {
            Projection::Range { span, .. } => f(span),
            Projection::Tensor(fs) => fs.iter().for_each(|p| p.visit_spans(f)),
            Projection::Select { selector, branches } => {
                f(selector);
                branches.iter().for_each(|p| p.visit_spans(f));
            }
        }
    }

    /// Qubits mentioned anywhere (sorted).
    pub fn qubits(&self, c: &Circuit) -> Result<Vec<usize>> {
        let mut qs = Vec::new();
        let mut err = None;
        self.visit_spans(&mut |s| match s.qubits(c) {
            Ok(v) => qs.extend(v),
            Err(e) => err = Some(e),
        });
        if let Some(e) = err {
            return Err(e);
        }
        qs.sort_unstable();
        qs.dedup();
        Ok(qs)
    }

    /// Basis indices of the admissible states in matrix-index order.
    pub fn basis(&self, c: &Circuit) -> Result<Vec<usize>> {
        Ok(match self {
            Projection::Range { span, bound } => {
                let qs = span.qubits(c)?;
                (0..*bound).map(|v| place(&qs, v)).collect()
            }
            Projection::Tensor(fs) => {
                let mut seen: Vec<usize> = Vec::new();
                let mut acc = vec![0usize];
                for f in fs {
                    let q = f.qubits(c)?;
                    if q.iter().any(|x| seen.contains(x)) {
                        return Err(Error::InvalidArgument("tensor factors overlap".into()));
                    }
                    seen.extend(q);
                    let b = f.basis(c)?;
                    acc = acc.iter().flat_map(|&a| b.iter().map(move |&x| a | x)).collect();
                }
                acc
            }
            Projection::Select { selector, branches } => {
                let sq = selector.qubits(c)?;
                let mut out = Vec::new();
                for (i, br) in branches.iter().enumerate() {
                    if br.qubits(c)?.iter().any(|q| sq.contains(q)) {
                        return Err(Error::InvalidArgument("branch overlaps selector".into()));
                    }
                    let s = place(&sq, i as u64);
                    out.extend(br.basis(c)?.into_iter().map(|x| x | s));
                }
                out
            }
        })
    }

    /// XOR-sum of cubes equal to the indicator of this projection restricted
    /// to its own qubits (other qubits are not inspected).
    fn poly(&self, c: &Circuit) -> Result<Vec<Cube>> {
        Ok(match self {
            Projection::Range { span, bound } => range_poly(&span.qubits(c)?, *bound),
            Projection::Tensor(fs) => {
                let mut acc: Vec<Cube> = vec![vec![]];
                for f in fs {
                    acc = xor_product(&acc, &f.poly(c)?);
                }
                acc
            }
            Projection::Select { selector, branches } => {
                let sq = selector.qubits(c)?;
                let all = self.qubits(c)?;
                let mut out = Vec::new();
                for (i, br) in branches.iter().enumerate() {
                    let mut mine = br.qubits(c)?;
                    mine.extend(&sq);
                    let mut pick: Cube = crate::circuit::value_controls(&sq, i as u64);
                    pick.extend(all.iter().filter(|q| !mine.contains(q)).map(|&q| Control::zero(q)));
                    out.extend(xor_product(&[pick], &br.poly(c)?));
                }
                reduce(out)
            }
        })
    }

    /// Cubes (XOR-summed) of the full indicator on circuit `c`, including the
    /// requirement that unmentioned qubits are |0>. Qubits in `skip` are ignored.
    pub fn indicator(&self, c: &Circuit, skip: &[usize]) -> Result<Vec<Cube>> {
        let mine = self.qubits(c)?;
        let zeros: Cube = (0..c.n_qubits())
            .filter(|q| !mine.contains(q) && !skip.contains(q))
            .map(Control::zero)
            .collect();
        Ok(xor_product(&[zeros], &self.poly(c)?))
    }

    /// Gates flipping `flag` exactly on admissible states.
    pub fn cnot_pi_gates(&self, c: &Circuit, flag: usize) -> Result<Vec<Gate>> {
        Ok(self
            .indicator(c, &[flag])?
            .into_iter()
            .map(|cube| Gate::x(flag).with_controls(&cube))
            .collect())
    }

    pub fn contains(&self, c: &Circuit, basis: usize) -> Result<bool> {
        let cubes = self.indicator(c, &[])?;
        let hit = cubes
            .iter()
            .filter(|cube| cube.iter().all(|l| ((basis >> l.qubit) & 1 == 1) == l.on))
            .count();
        Ok(hit % 2 == 1)
    }

    /// Renames register references.
    pub fn renamed(&self, f: &impl Fn(&str) -> String) -> Projection {
        let sp = |s: &Span| Span::new(&f(&s.reg), s.offset, s.width);
        match self {
            Projection::Range { span, bound } => Projection::Range {
                span: sp(span),
                bound: *bound,
            },
            Projection::Tensor(fs) => Projection::Tensor(fs.iter().map(|p| p.renamed(f)).collect()),
            Projection::Select { selector, branches } => Projection::Select {
                selector: sp(selector),
                branches: branches.iter().map(|p| p.renamed(f)).collect(),
            },
        }
    }

    /// Reorders the factors of a tensor projection: new factor i is old factor order[i].
    pub fn permuted(&self, order: &[usize]) -> Result<Projection> {
        match self {
            Projection::Tensor(fs) if fs.len() == order.len() => {
                let mut seen = vec![false; fs.len()];
                for &o in order {
                    if o >= fs.len() || seen[o] {
                        return Err(Error::InvalidArgument("not a permutation".into()));
                    }
                    seen[o] = true;
                }
                Ok(Projection::Tensor(order.iter().map(|&o| fs[o].clone()).collect()))
            }
            _ => Err(Error::InvalidArgument(
                "permutation needs a tensor projection with matching factor count".into(),
            )),
        }
    }
}

fn place(qs: &[usize], v: u64) -> usize {
    qs.iter()
        .enumerate()
        .fold(0, |acc, (i, &q)| acc | ((((v >> i) & 1) as usize) << q))
}

/// Cubes for value < bound, choosing the shorter of the direct and complemented forms.
pub fn range_poly(qs: &[usize], bound: u64) -> Vec<Cube> {
    let w = qs.len();
    if w < 64 && bound >= 1u64 << w {
        return vec![vec![]];
    }
    let direct = less_than_cubes(qs, bound);
    let mut comp: Vec<Cube> = vec![vec![]];
    for p in (0..w).rev() {
        if (bound >> p) & 1 == 0 {
            let mut cube: Cube = (p + 1..w)
                .map(|i| Control {
                    qubit: qs[i],
                    on: (bound >> i) & 1 == 1,
                })
                .collect();
            cube.push(Control::one(qs[p]));
            comp.push(cube);
        }
    }
    comp.push(crate::circuit::value_controls(qs, bound));
    if comp.len() < direct.len() {
        reduce(comp)
    } else {
        direct
    }
}

/// Mutually exclusive cubes whose union is value < bound.
pub fn less_than_cubes(qs: &[usize], bound: u64) -> Vec<Cube> {
    let w = qs.len();
    if w < 64 && bound >= 1u64 << w {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in (0..w).rev() {
        if (bound >> p) & 1 == 1 {
            let mut cube: Cube = (p + 1..w)
                .map(|i| Control {
                    qubit: qs[i],
                    on: (bound >> i) & 1 == 1,
                })
                .collect();
            cube.push(Control::zero(qs[p]));
            out.push(cube);
        }
    }
    out
}

fn and(a: &Cube, b: &Cube) -> Option<Cube> {
    let mut m: BTreeMap<usize, bool> = a.iter().map(|c| (c.qubit, c.on)).collect();
    for c in b {
        match m.get(&c.qubit) {
            Some(&on) if on != c.on => return None,
            _ => {
                m.insert(c.qubit, c.on);
            }
        }
    }
    Some(m.into_iter().map(|(qubit, on)| Control { qubit, on }).collect())
}

fn xor_product(a: &[Cube], b: &[Cube]) -> Vec<Cube> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            if let Some(z) = and(x, y) {
                out.push(z);
            }
        }
    }
    reduce(out)
}

/// Cancels cubes appearing an even number of times.
fn reduce(cubes: Vec<Cube>) -> Vec<Cube> {
    let mut count: BTreeMap<Cube, usize> = BTreeMap::new();
    for c in cubes {
        let mut c = c;
        c.sort();
        *count.entry(c).or_insert(0) += 1;
    }
    count.into_iter().filter(|(_, n)| n % 2 == 1).map(|(c, _)| c).collect()
}

/// Stand-alone CNOT_Π: the layout of `c` plus a one-qubit `flag` register.
pub fn cnot_pi(p: &Projection, c: &Circuit) -> Result<Circuit> {
    let mut out = c.empty_like();
    let flag = out.add_register(&fresh_name("flag", &[c]), 1, true)?;
    let gates = p.cnot_pi_gates(&out, flag)?;
    out.extend(gates)?;
    Ok(out)
}

/// `base`, `base1`, `base2`, ... whichever is unused in all circuits.
pub fn fresh_name(base: &str, cs: &[&Circuit]) -> String {
    let taken = |n: &str| cs.iter().any(|c| c.register(n).is_some());
    if !taken(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}{i}")).find(|n| !taken(n)).unwrap()
}
