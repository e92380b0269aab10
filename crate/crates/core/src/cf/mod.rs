//! Circuits for the factors of the BPX-preconditioned stiffness matrix:
//! per-level gradients C_l, transfers T_{l,L}, the coefficient D_A and the
//! assembled C_F, built either through the calculus or as one shared-shift
//! circuit.

mod optimized;

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::circuit::synth::{complete_isometry, dilation, real_to_complex, synthesize_unitary};
use crate::circuit::{Circuit, Gate};
use crate::encoding::{adjoint, controlled_block_diag, hconcat, multiply, tensor, vstack, BlockEncoding, Projection, Span};
use crate::fem::{self as factors, Coefficient, LevelSpec};
use crate::{Error, Result};

pub use optimized::{build_u_cf_optimized, input_flag_gates, input_flag_scratch, CARRY, THERMO};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfPath {
    Generic,
    Optimized,
}

impl std::str::FromStr for CfPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(CfPath::Generic),
            "optimized" => Ok(CfPath::Optimized),
            _ => Err(Error::InvalidArgument(format!("unknown path {s:?} (generic|optimized)"))),
        }
    }
}

/// Register names and widths shared by all cf circuits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    pub d: usize,
    pub levels: usize,
    pub lvl_width: usize,
    pub s_width: usize,
}

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

impl RegisterLayout {
    pub fn new(spec: &LevelSpec) -> Self {
        Self {
            d: spec.d(),
            levels: spec.levels(),
            lvl_width: ceil_log2(spec.levels()),
            s_width: ceil_log2(spec.d()),
        }
    }

    pub fn j(i: usize) -> String {
        format!("j{}", i + 1)
    }

    pub fn k(i: usize) -> String {
        format!("k{}", i + 1)
    }

    pub fn anc(i: usize) -> String {
        format!("a{}", i + 1)
    }

    /// Level-l nodes: high l bits of every j register, value < 2^l - 1.
    pub fn level_input(&self, l: usize) -> Projection {
        Projection::tensor(
            (0..self.d)
                .map(|i| {
                    Projection::range(Span::new(&Self::j(i), self.levels - l, l), (1 << l) - 1)
                        .expect("level range")
                })
                .collect(),
        )
    }

    /// (j_1..j_d, s, k_1..k_d) with the j registers restricted to their high `l` bits.
    pub fn gradient_space(&self, l: usize) -> Projection {
        let mut fs: Vec<Projection> = (0..self.d)
            .map(|i| Projection::full(Span::new(&Self::j(i), self.levels - l, l)))
            .collect();
        if self.d > 1 {
            fs.push(Projection::range(Span::new("s", 0, self.s_width), self.d as u64).unwrap());
        }
        fs.extend((0..self.d).map(|i| Projection::full(Span::new(&Self::k(i), 0, 1))));
        Projection::tensor(fs)
    }

    pub fn output(&self) -> Projection {
        self.gradient_space(self.levels)
    }

    pub fn input(&self) -> Result<Projection> {
        if self.levels == 1 {
            return Ok(self.level_input(1));
        }
        Projection::select(
            Span::new("lvl", 0, self.lvl_width),
            (1..=self.levels).map(|l| self.level_input(l)).collect(),
        )
    }

    /// Data registers in a fixed order: lvl, j.., s, k..
    pub fn declare(&self, c: &mut Circuit, with_lvl: bool, with_s: bool) -> Result<()> {
        if with_lvl && self.lvl_width > 0 {
            c.add_register("lvl", self.lvl_width, false)?;
        }
        for i in 0..self.d {
            c.add_register(&Self::j(i), self.levels, false)?;
        }
        if with_s && self.d > 1 {
            c.add_register("s", self.s_width, false)?;
        }
        for i in 0..self.d {
            c.add_register(&Self::k(i), 1, false)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Piece {
    R,
    C,
}

struct LocalGates {
    b_r: DMatrix<f64>,
    b_c: DMatrix<f64>,
    w_t: DMatrix<f64>,
}

fn local() -> &'static LocalGates {
    static CELL: OnceLock<LocalGates> = OnceLock::new();
    CELL.get_or_init(|| LocalGates {
        b_r: dilation(&(factors::r_local() * std::f64::consts::SQRT_2)).expect("contraction"),
        b_c: dilation(&(factors::c_local() * std::f64::consts::FRAC_1_SQRT_2)).expect("contraction"),
        w_t: complete_isometry(&factors::t_local()).expect("isometry"),
    })
}

/// Normalization of the local 2x2 factor realized by the dilation.
pub fn local_gamma(p: Piece) -> f64 {
    match p {
        Piece::R => std::f64::consts::FRAC_1_SQRT_2,
        Piece::C => std::f64::consts::SQRT_2,
    }
}

pub(crate) fn local_unitary(p: Piece) -> &'static DMatrix<f64> {
    match p {
        Piece::R => &local().b_r,
        Piece::C => &local().b_c,
    }
}

/// Gates of a real 2^n x 2^n orthogonal matrix on `qubits` (qubits[0] least significant).
pub(crate) fn orthogonal_gates(m: &DMatrix<f64>, qubits: &[usize]) -> Vec<Gate> {
    synthesize_unitary(&real_to_complex(m), qubits).expect("square orthogonal matrix")
}

/// W_T on local index (jbit, k).
pub(crate) fn transfer_gates(k: usize, jbit: usize) -> Vec<Gate> {
    orthogonal_gates(&local().w_t, &[k, jbit])
}

/// One-dimensional R or C factor on level l in dimension i.
pub fn build_piece(spec: &LevelSpec, i: usize, l: usize, kind: Piece) -> Result<BlockEncoding> {
    check_level(spec, l)?;
    let big = spec.levels();
    let mut c = Circuit::new();
    let j0 = c.add_register(&RegisterLayout::j(i), big, false)?;
    let k = c.add_register(&RegisterLayout::k(i), 1, false)?;
    let a = c.add_register(&RegisterLayout::anc(i), 1, true)?;
    c.push(Gate::h(k))?;
    c.push(Gate::add((j0 + big - l..j0 + big).collect(), 1).ctrl(k))?;
    c.extend(orthogonal_gates(local_unitary(kind), &[k, a]))?;
    let level = 2f64.powf(l as f64 / 2.0);
    let scale = match kind {
        Piece::R => 1.0 / level,
        Piece::C => level,
    };
    let jspan = Span::new(&RegisterLayout::j(i), big - l, l);
    BlockEncoding::from_parts(
        std::f64::consts::SQRT_2 * local_gamma(kind) * scale,
        c,
        Projection::range(jspan.clone(), (1 << l) - 1)?,
        Projection::tensor(vec![
            Projection::full(jspan),
            Projection::full(Span::new(&RegisterLayout::k(i), 0, 1)),
        ]),
    )
}

fn check_level(spec: &LevelSpec, l: usize) -> Result<()> {
    if l == 0 || l > spec.levels() {
        return Err(Error::InvalidArgument(format!("level {l} outside 1..={}", spec.levels())));
    }
    Ok(())
}

/// C_l, rows (j.., s, k..).
pub fn build_u_grad(spec: &LevelSpec, l: usize) -> Result<BlockEncoding> {
    check_level(spec, l)?;
    let d = spec.d();
    let enc = if d == 1 {
        build_piece(spec, 0, l, Piece::C)?
    } else {
        let interleaved_to_grouped: Vec<usize> = (0..d).map(|i| 2 * i).chain((0..d).map(|i| 2 * i + 1)).collect();
        let mut parts = Vec::with_capacity(d);
        for s in 0..d {
            let mut acc = build_piece(spec, 0, l, if s == 0 { Piece::C } else { Piece::R })?;
            for i in 1..d {
                acc = tensor(&acc, &build_piece(spec, i, l, if s == i { Piece::C } else { Piece::R })?)?;
            }
            parts.push(acc.permute_out(&interleaved_to_grouped)?);
        }
        let mut order: Vec<usize> = (1..=d).collect();
        order.push(0);
        order.extend(d + 1..=2 * d);
        vstack(&parts, "s")?.permute_out(&order)?
    };
    Ok(enc.with_norm_hint(factors::gradient_norm(spec, l)))
}

/// T_{l,L} (or T~ with the identity on s when `tilde`), from level-l to level-L gradient space.
pub fn build_u_transfer(spec: &LevelSpec, l: usize, tilde: bool) -> Result<BlockEncoding> {
    check_level(spec, l)?;
    let lay = RegisterLayout::new(spec);
    let big = spec.levels();
    let mut c = Circuit::new();
    lay.declare(&mut c, false, tilde)?;
    for lp in l..big {
        for i in 0..spec.d() {
            let jbit = c.reg(&RegisterLayout::j(i))?.qubit(big - lp - 1);
            let k = c.reg(&RegisterLayout::k(i))?.start;
            c.extend(transfer_gates(k, jbit))?;
        }
    }
    let strip = |p: Projection| -> Projection {
        if tilde || spec.d() == 1 {
            return p;
        }
        match p {
            Projection::Tensor(fs) => Projection::tensor(
                fs.into_iter()
                    .filter(|f| !matches!(f, Projection::Range { span, .. } if span.reg == "s"))
                    .collect(),
            ),
            other => other,
        }
    };
    Ok(BlockEncoding::from_parts(1.0, c, strip(lay.gradient_space(l)), strip(lay.output()))?
        .with_norm_hint(1.0)
        .with_cond_hint(1.0))
}

/// Upper bound on gamma / |C_F| from the per-level gradient norms.
pub fn cf_subnorm_bound(spec: &LevelSpec) -> f64 {
    let d = spec.d() as f64;
    let per: Vec<f64> = (1..=spec.levels())
        .map(|l| 2.0 * d.sqrt() * 2f64.powf(l as f64 * (2.0 - d) / 2.0) / factors::gradient_norm(spec, l))
        .collect();
    let gamma = (4.0 * d * spec.levels() as f64).sqrt();
    let top = (1..=spec.levels())
        .map(|l| spec.level_scale(l) * factors::gradient_norm(spec, l))
        .fold(0.0, f64::max);
    (gamma / top).min(per.iter().map(|s| s * s).sum::<f64>().sqrt())
}

/// C_F through the composition rules: hconcat over levels of scaled T~ C_l.
pub fn build_u_cf(spec: &LevelSpec) -> Result<BlockEncoding> {
    let mut parts = Vec::with_capacity(spec.levels());
    for l in 1..=spec.levels() {
        let grad = build_u_grad(spec, l)?;
        let block = if l == spec.levels() {
            grad
        } else {
            multiply(&build_u_transfer(spec, l, true)?, &grad)?
        };
        parts.push(block.scaled(spec.level_scale(l))?);
    }
    let enc = hconcat(&parts, "lvl")?;
    let bound = cf_subnorm_bound(spec);
    let s = enc.subnorm_bound.map_or(bound, |b| b.min(bound));
    Ok(enc.with_subnorm(Some(s)))
}

pub fn build_u_cf_path(spec: &LevelSpec, path: CfPath) -> Result<BlockEncoding> {
    match path {
        CfPath::Generic => build_u_cf(spec),
        CfPath::Optimized => build_u_cf_optimized(spec),
    }
}

/// D_A ⊗ Id on (s, k) for a scalar coefficient, normalization beta.
pub fn build_u_da(spec: &LevelSpec, coef: &Coefficient) -> Result<BlockEncoding> {
    let values = coef.scalar_values().ok_or_else(|| {
        Error::InvalidArgument("matrix-valued coefficient: only the classical emulation path supports it".into())
    })?;
    if values.len() != spec.cells(spec.levels()) {
        return Err(Error::InvalidArgument("coefficient does not match the level spec".into()));
    }
    let (alpha, beta) = (coef.alpha(), coef.beta());
    let lay = RegisterLayout::new(spec);
    let d = spec.d();
    let big = spec.levels();
    let angle = |a: f64| 2.0 * (a / beta).clamp(-1.0, 1.0).acos();
    let enc = if values.iter().all(|&a| (a - values[0]).abs() <= 1e-15 * beta) {
        let mut c = Circuit::new();
        lay.declare(&mut c, false, true)?;
        let w = c.add_register("dA", 1, true)?;
        if angle(values[0]).abs() > 1e-15 {
            c.push(Gate::ry(w, angle(values[0])))?;
        }
        BlockEncoding::from_parts(beta, c, lay.output(), lay.output())?
    } else {
        let sel: Vec<(String, usize)> = (0..d).map(|i| (RegisterLayout::j(i), big)).collect();
        let sel_ref: Vec<(&str, usize)> = sel.iter().map(|(n, w)| (n.as_str(), *w)).collect();
        let cells = controlled_block_diag(&sel_ref, values.len(), |j| {
            let mut c = Circuit::new();
            c.add_register("dA", 1, true)?;
            c.push(Gate::ry(0, angle(values[j])))?;
            BlockEncoding::from_parts(beta, c, Projection::zero(), Projection::zero())
        })?;
        let mut rest: Vec<(String, usize, u64)> = Vec::new();
        if d > 1 {
            rest.push(("s".into(), lay.s_width, d as u64));
        }
        rest.extend((0..d).map(|i| (RegisterLayout::k(i), 1, 2)));
        let rest_ref: Vec<(&str, usize, u64)> = rest.iter().map(|(n, w, b)| (n.as_str(), *w, *b)).collect();
        tensor(&cells, &BlockEncoding::identity(&rest_ref)?)?
    };
    Ok(enc.with_norm_hint(beta).with_cond_hint(beta / alpha))
}

/// C_Fᵀ (D_A ⊗ Id) C_F with normalization gamma(D_A) gamma(C_F)^2.
pub fn stiffness_sandwich(u_cf: &BlockEncoding, u_da: &BlockEncoding) -> Result<BlockEncoding> {
    let inner = multiply(u_da, u_cf)?;
    let enc = multiply(&adjoint(u_cf), &inner)?;
    let kappa = u_da.cond_hint.unwrap_or(f64::INFINITY);
    let bound = kappa * u_da.subnorm_bound.unwrap_or(1.0) * u_cf.subnorm_bound.map_or(f64::INFINITY, |s| s * s);
    Ok(enc.with_subnorm(bound.is_finite().then_some(bound)))
}
