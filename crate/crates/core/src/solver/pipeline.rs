//! The quantity of interest mᵀS⁻¹r as an inner product of two pseudoinverse
//! solutions, by emulation or by simulating the circuits.
//!
//! With Y = (D_A^{1/2} ⊗ Id) C_F and v~ = Fᵀv, the solver target is
//! x_v = (Yᵀ)⁺ v~ ≈ p~(Y/γ) v~ / γ, and mᵀS⁻¹r = <x_m, x_r>.

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::circuits::{append_prep, poly_circuit, projected_basis, PhaseFile, PolyCircuit};
use super::emulate::{apply_poly_matrix, SparseReference};
use super::poly::{formula_j, formula_k, ChebyshevPoly};
use crate::cf::{build_u_cf_path, build_u_da, CfPath};
use crate::circuit::noise::NoiseModel;
use crate::circuit::staged::{categories, draw_counts, Program, Stage, Stratified};
use crate::circuit::{Control, Gate};
use crate::encoding::{multiply, BlockEncoding};
use crate::fem::{preconditioned_spectrum, sparse, Coefficient, LevelSpec};
use crate::linalg::{dot, norm, LinearOperator, Scaled};
use crate::prep::{prep_frame, preconditioned_load, load_vector, FunctionSpec};
use crate::{Error, Result};

/// Largest system whose smallest singular value is found densely.
pub const DENSE_SPECTRUM_LIMIT: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Emulation,
    ExactAmplitude,
    Sampled { shots: u64, seed: u64 },
    /// `pool` faulty trajectories feed the stratified estimate
    Noisy { noise: NoiseModel, shots: u64, seed: u64, pool: usize },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Emulation => "emulation",
            Mode::ExactAmplitude => "exact-amplitude",
            Mode::Sampled { .. } => "sampled",
            Mode::Noisy { .. } => "noisy",
        }
    }
}

/// Positive factors turning a raw amplitude estimate into a physical value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScaleLedger {
    entries: Vec<(String, f64)>,
}

impl ScaleLedger {
    pub fn push(&mut self, label: &str, factor: f64) -> Result<()> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!("ledger factor {label} = {factor} is not finite and positive")));
        }
        self.entries.push((label.to_string(), factor));
        Ok(())
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn product(&self) -> f64 {
        self.entries.iter().map(|(_, f)| f).product()
    }

    pub fn convert(&self, raw: f64) -> f64 {
        raw * self.product()
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub tol: f64,
    /// taken from the dense spectrum when unset
    pub kappa: Option<f64>,
    /// formula value when unset (or the phase file's degree)
    pub j: Option<usize>,
    pub phases: Option<PhaseFile>,
    pub path: CfPath,
}

impl SolverConfig {
    pub fn new(tol: f64) -> Self {
        Self { tol, kappa: None, j: None, phases: None, path: CfPath::Optimized }
    }
}

#[derive(Clone, Debug)]
pub struct CircuitStats {
    pub qubits: usize,
    pub queries: usize,
    pub gates: usize,
    pub two_qubit_native: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct QoiResult {
    pub mode: &'static str,
    pub estimate: f64,
    pub reference: f64,
    pub std_error: Option<f64>,
    pub raw: f64,
    pub ledger: ScaleLedger,
    pub k: usize,
    pub j: usize,
    pub kappa_eff: f64,
    pub gamma: f64,
    pub circuit: Option<CircuitStats>,
}

impl QoiResult {
    pub fn rel_error(&self) -> f64 {
        ((self.estimate - self.reference) / self.reference).abs()
    }
}

#[derive(Clone, Debug)]
pub struct NormEstimate {
    /// |(Yᵀ)⁺ Fᵀr|, equal to |C_F⁺ᵀ Fᵀr| for A = 1
    pub norm: f64,
    pub std_error: Option<f64>,
    pub reference: f64,
    /// survival after the polynomial, then after the second encoding use
    pub p1: f64,
    pub p2: f64,
}

/// Everything the pipeline shares between modes for one (spec, A, config).
pub struct Solver {
    pub spec: LevelSpec,
    pub coef: Coefficient,
    pub config: SolverConfig,
    pub gamma: f64,
    pub kappa_eff: f64,
    pub poly: ChebyshevPoly,
    y: CsrMatrix<f64>,
    frame: CsrMatrix<f64>,
    reference: SparseReference,
}

/// γ/σ_min(Y) with σ_min² the smallest eigenvalue of the preconditioned system.
pub fn kappa_from_spectrum(spec: &LevelSpec, coef: &Coefficient, gamma: f64) -> Result<f64> {
    if spec.n() > DENSE_SPECTRUM_LIMIT {
        return Err(Error::TooLarge { what: "unknowns for the dense spectrum (pass kappa)", value: spec.n(), limit: DENSE_SPECTRUM_LIMIT });
    }
    let e = preconditioned_spectrum(spec, coef)?;
    Ok((gamma / e[0].sqrt()).max(1.0))
}

pub fn encoding_gamma(spec: &LevelSpec, coef: &Coefficient) -> f64 {
    (4.0 * spec.d() as f64 * spec.levels() as f64).sqrt() * coef.beta().sqrt()
}

impl Solver {
    pub fn new(spec: &LevelSpec, coef: &Coefficient, config: SolverConfig) -> Result<Self> {
        let gamma = encoding_gamma(spec, coef);
        let kappa_eff = match config.kappa {
            Some(k) => k,
            None => kappa_from_spectrum(spec, coef, gamma)?,
        };
        let k = formula_k(kappa_eff, config.tol);
        let j = match (&config.phases, config.j) {
            (Some(p), _) => p.j(),
            (None, Some(j)) => j,
            (None, None) => formula_j(k, config.tol),
        };
        let poly = ChebyshevPoly::with_degree(kappa_eff, config.tol, k, j)?;
        Ok(Self {
            spec: spec.clone(),
            coef: coef.clone(),
            gamma,
            kappa_eff,
            poly,
            y: sparse::scaled_factor(spec, coef, true)?,
            frame: sparse::frame(spec)?,
            reference: SparseReference::new(spec, coef)?,
            config,
        })
    }

    /// Fᵀv for a nodal vector v.
    pub fn frame_t(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.frame.ncols()];
        self.frame.apply_t(v, &mut out);
        out
    }

    /// p~(Y/γ) v / γ
    pub fn emulate(&self, v: &[f64]) -> Vec<f64> {
        let m = Scaled { op: &self.y, factor: 1.0 / self.gamma };
        apply_poly_matrix(&self.poly, &m, v).into_iter().map(|x| x / self.gamma).collect()
    }

    /// (Yᵀ)⁺ Fᵀr for the nodal r
    pub fn target(&self, r: &[f64]) -> Vec<f64> {
        self.reference.target(r)
    }

    pub fn reference_qoi(&self, m: &[f64], r: &[f64]) -> f64 {
        self.reference.qoi(m, r)
    }

    /// Y as a block encoding with normalization γ.
    pub fn encoding(&self) -> Result<BlockEncoding> {
        let cf = build_u_cf_path(&self.spec, self.config.path)?;
        let enc = match self.coef.scalar_values() {
            Some(v) if v.iter().all(|&a| a == v[0]) => cf.scaled(v[0].sqrt())?,
            _ => {
                let cells: Vec<DMatrix<f64>> = (0..self.coef.num_cells())
                    .map(|j| crate::fem::sym_sqrt(self.coef.cell(j)))
                    .collect();
                let root = Coefficient::from_cells(self.spec.d(), cells)?;
                multiply(&build_u_da(&self.spec, &root)?, &cf)?
            }
        };
        if enc.subnorm_bound.is_none() {
            return Err(Error::UnsetSubnorm("preconditioned factor".into()));
        }
        debug_assert!((enc.gamma - self.gamma).abs() <= 1e-12 * self.gamma);
        Ok(enc)
    }

    pub fn poly_circuit(&self, enc: &BlockEncoding) -> Result<PolyCircuit> {
        poly_circuit(&self.spec, enc, &self.poly, self.config.phases.as_ref())
    }

    fn stats(pc: &PolyCircuit, program: &Program, native: Option<&Program>) -> CircuitStats {
        let gates = program.stages().iter().map(|s| s.circuit.len()).sum();
        CircuitStats {
            qubits: program.n_qubits(),
            queries: pc.queries,
            gates,
            two_qubit_native: native.map(|p| p.stages().iter().map(|s| s.circuit.counts().two_qubit).sum()),
        }
    }

    /// Hadamard test: selector c picks |m~> or |r~>, the polynomial acts on
    /// both, and P(clean, c = 0) - P(clean, c = 1) = Re<φ_m, φ_r>.
    pub fn hadamard_program(&self, enc: &BlockEncoding, pc: &PolyCircuit, m_t: &[f64], r_t: &[f64]) -> Result<Program> {
        let mut c = pc.circuit.empty_like();
        let cq = c.add_register("c", 1, true)?;
        c.push(Gate::h(cq))?;
        if same_direction(m_t, r_t) {
            append_prep(&mut c, &prep_frame(&self.spec, r_t)?.circuit, &[])?;
        } else {
            append_prep(&mut c, &prep_frame(&self.spec, m_t)?.circuit, &[Control::zero(cq)])?;
            append_prep(&mut c, &prep_frame(&self.spec, r_t)?.circuit, &[Control::one(cq)])?;
        }
        c.extend(pc.circuit.gates().iter().cloned())?;
        c.push(Gate::h(cq))?;
        let out = projected_basis(enc, true)?;
        let with_c: Vec<usize> = out.iter().map(|b| b | 1 << cq).collect();
        Program::new(vec![Stage { circuit: c, keep: vec![out, with_c] }])
    }

    /// Stage one prepares |r~> and applies the polynomial, kept on the clean
    /// output space; stage two applies U† and keeps the input space.
    pub fn norm_program(&self, enc: &BlockEncoding, pc: &PolyCircuit, r_t: &[f64]) -> Result<Program> {
        let mut first = pc.circuit.empty_like();
        append_prep(&mut first, &prep_frame(&self.spec, r_t)?.circuit, &[])?;
        first.extend(pc.circuit.gates().iter().cloned())?;
        let mut second = pc.circuit.empty_like();
        second.extend(enc.circuit.inverse().gates().iter().cloned())?;
        Program::new(vec![
            Stage { circuit: first, keep: vec![projected_basis(enc, true)?] },
            Stage { circuit: second, keep: vec![projected_basis(enc, false)?] },
        ])
    }

    fn events(&self, program: &Program, mode: &Mode) -> Result<(Vec<f64>, Option<Program>)> {
        match mode {
            Mode::Noisy { noise, seed, pool, .. } => {
                let native = program.to_native()?;
                let s = native.stratified(noise, *pool, *seed)?;
                Ok((s.mean(), Some(native)))
            }
            _ => Ok((program.exact(), None)),
        }
    }

    fn ledger(&self, m_t: &[f64], r_t: &[f64], pnorm: f64) -> Result<ScaleLedger> {
        let mut l = ScaleLedger::default();
        l.push("|F^T m|", norm(m_t))?;
        l.push("|F^T r|", norm(r_t))?;
        l.push("polynomial normalization squared", pnorm * pnorm)?;
        l.push("1/gamma^2", 1.0 / (self.gamma * self.gamma))?;
        Ok(l)
    }

    /// mᵀS⁻¹r for the load of f and the nodal vector m.
    pub fn qoi(&self, f: &FunctionSpec, m: &[f64], mode: &Mode) -> Result<QoiResult> {
        let r = load_vector(f, &self.spec)?;
        if m.len() != r.len() {
            return Err(Error::InvalidArgument("m does not match the number of unknowns".into()));
        }
        let r_t = preconditioned_load(f, &self.spec)?;
        let m_t = self.frame_t(m);
        let reference = self.reference_qoi(m, &r);
        let mut out = QoiResult {
            mode: mode.name(),
            estimate: 0.0,
            reference,
            std_error: None,
            raw: 0.0,
            ledger: ScaleLedger::default(),
            k: self.poly.k,
            j: self.poly.j,
            kappa_eff: self.kappa_eff,
            gamma: self.gamma,
            circuit: None,
        };
        if *mode == Mode::Emulation {
            let unit = |v: &[f64]| -> Vec<f64> {
                let n = norm(v);
                v.iter().map(|x| x / n).collect()
            };
            let m_sc = Scaled { op: &self.y, factor: 1.0 / self.gamma };
            let xm = apply_poly_matrix(&self.poly, &m_sc, &unit(&m_t));
            let xr = apply_poly_matrix(&self.poly, &m_sc, &unit(&r_t));
            out.raw = dot(&xm, &xr);
            out.ledger = self.ledger(&m_t, &r_t, 1.0)?;
            out.estimate = out.ledger.convert(out.raw);
            return Ok(out);
        }
        let enc = self.encoding()?;
        let pc = self.poly_circuit(&enc)?;
        let program = self.hadamard_program(&enc, &pc, &m_t, &r_t)?;
        let (ev, native) = self.events(&program, mode)?;
        out.circuit = Some(Self::stats(&pc, &program, native.as_ref()));
        out.ledger = self.ledger(&m_t, &r_t, pc.norm)?;
        let (raw, se) = match mode {
            Mode::ExactAmplitude => (ev[0] - ev[1], None),
            Mode::Sampled { shots, seed } | Mode::Noisy { shots, seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let n = draw_counts(&categories(&ev, 1), *shots, &mut rng);
                let s = *shots as f64;
                let (p0, p1) = (n[0] as f64 / s, n[1] as f64 / s);
                let raw = p0 - p1;
                (raw, Some(((p0 + p1 - raw * raw).max(0.0) / s).sqrt()))
            }
            Mode::Emulation => unreachable!(),
        };
        out.raw = raw;
        out.estimate = out.ledger.convert(raw);
        out.std_error = se.map(|e| e * out.ledger.product());
        Ok(out)
    }

    /// |(Yᵀ)⁺ Fᵀr| from the survival probability of the second encoding use:
    /// P2 = |Fᵀr|² / (γ² |x|²).
    pub fn norm_estimate(&self, f: &FunctionSpec, mode: &Mode) -> Result<NormEstimate> {
        let r = load_vector(f, &self.spec)?;
        let r_t = preconditioned_load(f, &self.spec)?;
        let reference = norm(&self.target(&r));
        let rn = norm(&r_t);
        if *mode == Mode::Emulation {
            let x = self.emulate(&r_t);
            let mut yx = vec![0.0; r_t.len()];
            self.y.apply_t(&x, &mut yx);
            let xn = norm(&x);
            let p2 = (norm(&yx) / (self.gamma * xn)).powi(2);
            return Ok(NormEstimate { norm: rn / (self.gamma * p2.sqrt()), std_error: None, reference, p1: f64::NAN, p2 });
        }
        let enc = self.encoding()?;
        let pc = self.poly_circuit(&enc)?;
        let program = self.norm_program(&enc, &pc, &r_t)?;
        let (ev, _) = self.events(&program, mode)?;
        let (p1, p2, se) = match mode {
            Mode::ExactAmplitude => (ev[0], ev[1] / ev[0], None),
            Mode::Sampled { shots, seed } | Mode::Noisy { shots, seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let n = draw_counts(&categories(&ev, 2), *shots, &mut rng);
                // categories: fail first stage, pass both, fail second
                let n1 = (n[1] + n[2]) as f64;
                if n[1] == 0 {
                    return Err(Error::InvalidArgument("no shot survived both stages; raise shots".into()));
                }
                let p2 = n[1] as f64 / n1;
                (n1 / *shots as f64, p2, Some((p2 * (1.0 - p2) / n1).sqrt()))
            }
            Mode::Emulation => unreachable!(),
        };
        let est = rn / (self.gamma * p2.sqrt());
        Ok(NormEstimate { norm: est, std_error: se.map(|s| est * s / (2.0 * p2)), reference, p1, p2 })
    }

    /// Stratified outcome probabilities of the two-stage program, for
    /// repeated shot draws.
    pub fn noisy_norm_events(&self, f: &FunctionSpec, noise: &NoiseModel, pool: usize, seed: u64) -> Result<(Stratified, CircuitStats)> {
        let r_t = preconditioned_load(f, &self.spec)?;
        let enc = self.encoding()?;
        let pc = self.poly_circuit(&enc)?;
        let program = self.norm_program(&enc, &pc, &r_t)?;
        let native = program.to_native()?;
        let s = native.stratified(noise, pool, seed)?;
        Ok((s, Self::stats(&pc, &program, Some(&native))))
    }

    /// |Fᵀr|² / γ², the factor turning 1/P2 into |x|².
    pub fn norm_ledger(&self, f: &FunctionSpec) -> Result<ScaleLedger> {
        let r_t = preconditioned_load(f, &self.spec)?;
        let mut l = ScaleLedger::default();
        l.push("|F^T r|^2", dot(&r_t, &r_t))?;
        l.push("1/gamma^2", 1.0 / (self.gamma * self.gamma))?;
        Ok(l)
    }
}

fn same_direction(a: &[f64], b: &[f64]) -> bool {
    let (na, nb) = (norm(a), norm(b));
    a.iter().zip(b).all(|(x, y)| (x / na - y / nb).abs() <= 1e-14)
}

/// One-call entry: dense-spectrum κ_eff, formula degree, optimized encoding.
pub fn qoi_pipeline(
    spec: &LevelSpec,
    coef: &Coefficient,
    f: &FunctionSpec,
    m: &[f64],
    tol: f64,
    mode: &Mode,
) -> Result<QoiResult> {
    Solver::new(spec, coef, SolverConfig::new(tol))?.qoi(f, m, mode)
}
