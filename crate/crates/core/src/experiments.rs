//! Experiment drivers behind the command line. Every table is a pure
//! function of its config, so reruns with the same seed give identical CSV.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cf::{build_u_cf_path, CfPath};
use crate::circuit::decompose::to_native;
use crate::circuit::noise::NoiseModel;
use crate::circuit::staged::{categories, draw_counts};
use crate::fem::{sparse, stiffness_condition, effective_condition, Coefficient, LevelSpec};
use crate::prep::{prep_preconditioned, FunctionSpec};
use crate::solver::{kappa_eff_search, Mode, PhaseFile, SearchProblem, Solver, SolverConfig};
use crate::{Error, Result};

/// Largest unknown count for which dense condition numbers are reported.
const DENSE_LIMIT: usize = 2048;

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: String,
    pub d: usize,
    pub levels: RangeInclusive<usize>,
    /// None: 2^{-L} in the condition study, 1e-3 elsewhere
    pub tol: Option<f64>,
    pub modes: Vec<String>,
    pub shots: u64,
    pub seed: Option<u64>,
    pub eps2: Vec<f64>,
    pub js: Vec<usize>,
    pub runs: usize,
    /// faulty trajectories simulated per noise point
    pub pool: usize,
    pub f: FunctionSpec,
    pub phases: Option<PhaseFile>,
    pub path: CfPath,
    /// highest level of the d = 2 condition sweep
    pub d2_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            d: 1,
            levels: 4..=4,
            tol: None,
            modes: vec!["emulation".into()],
            shots: 10_000,
            seed: None,
            eps2: vec![7e-3, 3e-3, 1e-3, 1e-4, 0.0],
            js: vec![2, 3, 4],
            runs: 200,
            pool: 200,
            f: FunctionSpec::Constant(1.0),
            phases: None,
            path: CfPath::Optimized,
            d2_cap: 6,
        }
    }
}

impl ExperimentConfig {
    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs --seed", self.command)))
    }

    fn metadata(&self) -> Vec<String> {
        let mut m = vec![format!("qfem {} {}", env!("CARGO_PKG_VERSION"), self.command)];
        m.push(format!(
            "d={} levels={}..{} tol={} f={} path={:?}",
            self.d,
            self.levels.start(),
            self.levels.end(),
            self.tol.map_or("2^-L".to_string(), |t| t.to_string()),
            self.f,
            self.path
        ));
        m
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    /// written as `# ` lines ahead of the header
    pub meta: Vec<String>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(meta: Vec<String>, header: &[&'static str]) -> Self {
        Self { meta, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for m in &self.meta {
            let _ = writeln!(s, "# {m}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

fn unit_coefficient(spec: &LevelSpec) -> Result<Coefficient> {
    Coefficient::constant(spec, 1.0)
}

/// Sizes and condition numbers per level.
pub fn cmd_assemble(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(cfg.metadata(), &["L", "d", "n", "frame_dim", "nnz", "cond_S", "cond_bpx"]);
    for l in cfg.levels.clone() {
        let spec = LevelSpec::new(cfg.d, l)?;
        let coef = unit_coefficient(&spec)?;
        let y = sparse::scaled_factor(&spec, &coef, false)?;
        let s = &y.transpose() * &y;
        let (cs, cb) = if spec.n() <= DENSE_LIMIT {
            (stiffness_condition(&spec, &coef)?.to_string(), effective_condition(&spec, &coef)?.to_string())
        } else {
            (String::new(), String::new())
        };
        t.rows.push(vec![
            l.to_string(),
            cfg.d.to_string(),
            spec.n().to_string(),
            spec.frame_dim().to_string(),
            s.nnz().to_string(),
            cs,
            cb,
        ]);
    }
    Ok(t)
}

/// Resources of the C_F encoding per level, and the circuit text of the
/// last one.
pub fn cmd_encode(cfg: &ExperimentConfig) -> Result<(Table, String)> {
    let mut t = Table::new(cfg.metadata(), &["L", "d", "path", "qubits", "gates", "native_2q", "gamma"]);
    let mut dump = String::new();
    for l in cfg.levels.clone() {
        let spec = LevelSpec::new(cfg.d, l)?;
        let enc = build_u_cf_path(&spec, cfg.path)?;
        let native = to_native(&enc.circuit)?;
        t.rows.push(vec![
            l.to_string(),
            cfg.d.to_string(),
            format!("{:?}", cfg.path).to_lowercase(),
            enc.n_qubits().to_string(),
            enc.circuit.len().to_string(),
            native.counts().two_qubit.to_string(),
            enc.gamma.to_string(),
        ]);
        dump = enc.circuit.dump();
    }
    Ok((t, dump))
}

/// Amplitudes of the prepared |Fᵀr> at the last level of the range.
pub fn cmd_prep(cfg: &ExperimentConfig) -> Result<Table> {
    let spec = LevelSpec::new(cfg.d, *cfg.levels.end())?;
    let st = prep_preconditioned(&cfg.f, &spec)?;
    let mut meta = cfg.metadata();
    meta.push(format!("norm={} gates={}", st.norm, st.circuit.len()));
    let mut t = Table::new(meta, &["index", "amplitude"]);
    for (i, a) in st.amplitudes.iter().enumerate() {
        if *a != 0.0 {
            t.rows.push(vec![i.to_string(), a.to_string()]);
        }
    }
    Ok(t)
}

fn parse_mode(name: &str, cfg: &ExperimentConfig) -> Result<Mode> {
    Ok(match name {
        "emulation" => Mode::Emulation,
        "exact" => Mode::ExactAmplitude,
        "sampled" => Mode::Sampled { shots: cfg.shots, seed: cfg.seed()? },
        "noisy" => Mode::Noisy {
            noise: NoiseModel::new(*cfg.eps2.first().unwrap_or(&0.0))?,
            shots: cfg.shots,
            seed: cfg.seed()?,
            pool: cfg.pool,
        },
        _ => return Err(Error::InvalidArgument(format!("unknown mode {name:?} (emulation, exact, sampled, noisy)"))),
    })
}

/// mᵀS⁻¹r with m = h^d (1,..,1), one row per mode.
pub fn cmd_qoi(cfg: &ExperimentConfig) -> Result<Table> {
    let spec = LevelSpec::new(cfg.d, *cfg.levels.end())?;
    let coef = unit_coefficient(&spec)?;
    let solver = Solver::new(
        &spec,
        &coef,
        SolverConfig { phases: cfg.phases.clone(), path: cfg.path, ..SolverConfig::new(cfg.tol.unwrap_or(1e-3)) },
    )?;
    let m = vec![spec.h(spec.levels()).powi(cfg.d as i32); spec.n()];
    let mut meta = cfg.metadata();
    meta.push(format!("K={} J={} kappa_eff={} gamma={}", solver.poly.k, solver.poly.j, solver.kappa_eff, solver.gamma));
    let mut t = Table::new(meta, &["mode", "estimate", "reference", "rel_error", "ledger_product"]);
    for name in &cfg.modes {
        let r = solver.qoi(&cfg.f, &m, &parse_mode(name, cfg)?)?;
        t.rows.push(vec![
            name.clone(),
            r.estimate.to_string(),
            r.reference.to_string(),
            r.rel_error().to_string(),
            r.ledger.product().to_string(),
        ]);
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionRow {
    pub l: usize,
    pub d: usize,
    pub method: &'static str,
    pub steps: usize,
    pub rel_error: f64,
    pub kappa_eff: f64,
    pub j: usize,
}

/// Least solver steps reaching tol = 2^{-L}, with and without the
/// multilevel preconditioner.
pub fn cmd_condition(cfg: &ExperimentConfig) -> Result<(Table, Vec<ConditionRow>)> {
    if !(1..=2).contains(&cfg.d) {
        return Err(Error::InvalidArgument("the condition study runs for d = 1 or 2".into()));
    }
    let mut meta = cfg.metadata();
    let mut levels = cfg.levels.clone();
    if cfg.d == 2 && *levels.end() > cfg.d2_cap {
        meta.push(format!(
            "warning: d=2 range truncated to L<={} (requested up to {})",
            cfg.d2_cap,
            levels.end()
        ));
        levels = *levels.start()..=cfg.d2_cap;
    }
    let points: Vec<(usize, bool)> = levels.flat_map(|l| [(l, true), (l, false)]).collect();
    let mut rows = points
        .par_iter()
        .map(|&(l, pre)| -> Result<ConditionRow> {
            let spec = LevelSpec::new(cfg.d, l)?;
            let coef = unit_coefficient(&spec)?;
            let tol = cfg.tol.unwrap_or(0.5f64.powi(l as i32));
            let p = SearchProblem::new(&spec, &coef, &cfg.f, pre)?;
            let s = kappa_eff_search(&p, tol)?;
            Ok(ConditionRow {
                l,
                d: cfg.d,
                method: if pre { "bpx" } else { "none" },
                steps: s.steps,
                rel_error: s.rel_error,
                kappa_eff: s.kappa_eff,
                j: s.j,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| (a.method, a.l).cmp(&(b.method, b.l)));
    let mut t = Table::new(meta, &["L", "d", "method", "steps", "rel_error"]);
    for r in &rows {
        t.rows.push(vec![r.l.to_string(), r.d.to_string(), r.method.into(), r.steps.to_string(), r.rel_error.to_string()]);
    }
    Ok((t, rows))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRow {
    pub eps2: f64,
    pub j: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// QoI = |x|² from the two-stage norm circuit, with m = r. Each of `runs`
/// batches draws `shots` outcomes; the interval spans the central 95% of
/// the batch estimates.
pub fn cmd_noise(cfg: &ExperimentConfig) -> Result<(Table, Vec<NoiseRow>)> {
    let seed = cfg.seed()?;
    let spec = LevelSpec::new(cfg.d, *cfg.levels.end())?;
    let coef = unit_coefficient(&spec)?;
    let mut meta = cfg.metadata();
    meta.push(format!("runs={} shots={} pool={} seed={seed}", cfg.runs, cfg.shots, cfg.pool));
    let mut solvers = Vec::new();
    for &j in &cfg.js {
        let base = SolverConfig { j: Some(j), path: cfg.path, ..SolverConfig::new(cfg.tol.unwrap_or(0.1)) };
        let k = Solver::new(&spec, &coef, base.clone())?.poly.k;
        let phases = match &cfg.phases {
            Some(p) if p.j() == j => Some(p.clone()),
            _ => PhaseFile::builtin(k, j),
        };
        let s = Solver::new(&spec, &coef, SolverConfig { phases, ..base })?;
        meta.push(format!("J={j} K={} kappa_eff={} circuit={}", s.poly.k, s.kappa_eff,
            if s.config.phases.is_some() { "qsvt" } else { "lcu" }));
        solvers.push(s);
    }
    let points: Vec<(usize, usize)> = (0..cfg.eps2.len()).flat_map(|e| (0..solvers.len()).map(move |s| (e, s))).collect();
    let rows = points
        .par_iter()
        .map(|&(e, si)| -> Result<NoiseRow> {
            let s = &solvers[si];
            let eps2 = cfg.eps2[e];
            let point_seed = seed ^ ((e as u64) << 32 | si as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let (strat, _) = s.noisy_norm_events(&cfg.f, &NoiseModel::new(eps2)?, cfg.pool, point_seed)?;
            let cats = categories(&strat.mean(), 2);
            let scale = s.norm_ledger(&cfg.f)?.product();
            let mut rng = ChaCha8Rng::seed_from_u64(point_seed.wrapping_add(1));
            let mut est: Vec<f64> = (0..cfg.runs)
                .map(|_| {
                    let n = draw_counts(&cats, cfg.shots, &mut rng);
                    // no survivor at all would be an infinite norm; cap at one
                    scale * (n[1] + n[2]) as f64 / n[1].max(1) as f64
                })
                .collect();
            est.sort_by(f64::total_cmp);
            Ok(NoiseRow {
                eps2,
                j: s.poly.j,
                mean: est.iter().sum::<f64>() / est.len() as f64,
                ci_low: percentile(&est, 0.025),
                ci_high: percentile(&est, 0.975),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(meta, &["eps2", "J", "mean", "ci_low", "ci_high"]);
    for r in &rows {
        t.rows.push(vec![r.eps2.to_string(), r.j.to_string(), r.mean.to_string(), r.ci_low.to_string(), r.ci_high.to_string()]);
    }
    Ok((t, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.025), 2.5);
        assert_eq!(percentile(&v, 0.5), 50.0);
        assert_eq!(percentile(&[3.0], 0.9), 3.0);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["a".into()], &["x", "y"]);
        t.rows.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.to_csv(), "# a\nx,y\n1,2\n");
        assert_eq!(t.column("y"), Some(vec!["2"]));
    }
}
