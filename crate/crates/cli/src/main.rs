use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfem::cf::CfPath;
use qfem::experiments::{self, ExperimentConfig, Table};
use qfem::prep::FunctionSpec;
use qfem::solver::PhaseFile;

#[derive(Parser)]
#[command(name = "qfem", version, about = "Multilevel-preconditioned quantum FEM solver experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sizes and condition numbers of the stiffness matrix
    Assemble(Common),
    /// Resources of the C_F block encoding
    Encode {
        #[command(flatten)]
        common: Common,
        /// write the circuit of the last level here
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Amplitudes of the prepared preconditioned load
    Prep(Common),
    /// Quantity of interest m^T S^-1 r
    Qoi(Common),
    /// Solver steps against level, with and without preconditioning
    Condition(Common),
    /// Noisy norm circuit sweep over two-qubit error rates and degrees
    Noise(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// single level; --levels takes precedence
    #[arg(long = "L")]
    l: Option<usize>,
    /// inclusive range a..b
    #[arg(long, value_parser = parse_range)]
    levels: Option<RangeInclusive<usize>>,
    #[arg(long)]
    tol: Option<f64>,
    /// comma separated: emulation, exact, sampled, noisy
    #[arg(long, default_value = "emulation")]
    mode: String,
    #[arg(long, default_value_t = 10_000)]
    shots: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// comma separated two-qubit error rates
    #[arg(long, value_delimiter = ',')]
    eps2: Option<Vec<f64>>,
    /// comma separated polynomial degrees J for the noise sweep
    #[arg(long, value_delimiter = ',')]
    j: Option<Vec<usize>>,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 200)]
    pool: usize,
    /// const:<c> or poly:<c0,c1,..>
    #[arg(long, default_value = "const:1")]
    f: FunctionSpec,
    #[arg(long)]
    phases: Option<PathBuf>,
    #[arg(long, default_value = "optimized")]
    path: CfPath,
    #[arg(long, default_value_t = 6)]
    d2_cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..=b)
}

impl Common {
    fn config(&self, command: &str, default_levels: RangeInclusive<usize>) -> qfem::Result<ExperimentConfig> {
        let base = ExperimentConfig::default();
        let levels = match (&self.levels, self.l) {
            (Some(r), _) => r.clone(),
            (None, Some(l)) => l..=l,
            (None, None) => default_levels,
        };
        Ok(ExperimentConfig {
            command: command.into(),
            d: self.d,
            levels,
            tol: self.tol,
            modes: self.mode.split(',').map(|s| s.trim().to_string()).collect(),
            shots: self.shots,
            seed: self.seed,
            eps2: self.eps2.clone().unwrap_or(base.eps2),
            js: self.j.clone().unwrap_or(base.js),
            runs: self.runs,
            pool: self.pool,
            f: self.f.clone(),
            phases: self.phases.as_deref().map(PhaseFile::read).transpose()?,
            path: self.path,
            d2_cap: self.d2_cap,
        })
    }
}

fn emit(table: &Table, out: &Option<PathBuf>) -> std::io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, table.to_csv()),
        None => {
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Assemble(c) => emit(&experiments::cmd_assemble(&c.config("assemble", 1..=6)?)?, &c.out)?,
        Cmd::Encode { common: c, dump } => {
            let (t, text) = experiments::cmd_encode(&c.config("encode", 4..=4)?)?;
            if let Some(p) = dump {
                std::fs::write(p, text)?;
            }
            emit(&t, &c.out)?
        }
        Cmd::Prep(c) => emit(&experiments::cmd_prep(&c.config("prep", 4..=4)?)?, &c.out)?,
        Cmd::Qoi(c) => emit(&experiments::cmd_qoi(&c.config("qoi", 4..=4)?)?, &c.out)?,
        Cmd::Condition(c) => {
            let hi = if c.d == 1 { 12 } else { 8 };
            emit(&experiments::cmd_condition(&c.config("condition", 3..=hi)?)?.0, &c.out)?
        }
        Cmd::Noise(c) => emit(&experiments::cmd_noise(&c.config("noise", 4..=4)?)?.0, &c.out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
