//! `drconf`: verification suites and rigidity probes for Damek-Ricci spaces.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on
//! usage or configuration errors.

// `!(x <= tol)` rejects NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use config::{
    CoeffsysConfig, ConfsysConfig, EinsteinConfig, ProbeConfig, RunConfig, SpaceformConfig, TablesConfig,
    VerifyAlgebraConfig,
};
use report::{Checked, Fail, Report};

#[derive(Parser, Debug)]
#[command(name = "drconf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all sampled points and parameter draws.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Overrides the pass tolerance of the command.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Overrides the point or sample count of the command.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Worker threads; all available cores by default.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Writes the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Validate J-maps: skewness, Clifford relation, bracket duality, basis alignment.
    VerifyAlgebra,
    /// Compare the s0 Lie-derivative tables with their exact values.
    VerifyTables,
    /// Check Ric = λg with constant negative λ.
    CheckEinstein,
    /// Verify conformal fields on the space forms against their potentials.
    Spaceform,
    /// Evaluate the s0 block equations for a field or a harmonic expansion.
    ConfsysResiduals,
    /// Solve the truncated coefficient system.
    Coeffsys,
    /// Search an ansatz for conformal fields and classify them.
    Probe,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::VerifyAlgebra => "verify-algebra",
            Command::VerifyTables => "verify-tables",
            Command::CheckEinstein => "check-einstein",
            Command::Spaceform => "spaceform",
            Command::ConfsysResiduals => "confsys-residuals",
            Command::Coeffsys => "coeffsys",
            Command::Probe => "probe",
        }
    }
}

fn load<C: RunConfig>(common: &Common) -> Result<C, String> {
    let mut cfg: C = match &common.config {
        None => C::default(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_value(C::normalize(value)).map_err(|e| format!("{}: {e}", path.display()))?
        }
    };
    cfg.apply(common.tol, common.samples);
    cfg.validate()?;
    Ok(cfg)
}

fn execute<C: RunConfig>(
    command: Command,
    common: &Common,
    body: fn(&C, u64) -> Result<Checked, Fail>,
) -> Result<Report, String> {
    let cfg: C = load(common)?;
    let checked = match body(&cfg, common.seed) {
        Ok(c) => c,
        Err(Fail::Usage(msg)) => return Err(msg),
        Err(Fail::Check { reason, message }) => Checked {
            passed: false,
            reason: Some(reason),
            result: serde_json::json!({ "error": message }),
        },
    };
    let value = serde_json::to_value(&cfg).map_err(|e| e.to_string())?;
    Ok(Report::new(command.name(), common.seed, value, checked))
}

fn run(cli: &Cli) -> Result<Report, String> {
    if let Some(w) = cli.common.workers {
        if w == 0 {
            return Err("--workers must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let common = &cli.common;
    let c = cli.command;
    match c {
        Command::VerifyAlgebra => execute::<VerifyAlgebraConfig>(c, common, commands::verify_algebra),
        Command::VerifyTables => execute::<TablesConfig>(c, common, commands::verify_tables),
        Command::CheckEinstein => execute::<EinsteinConfig>(c, common, commands::check_einstein),
        Command::Spaceform => execute::<SpaceformConfig>(c, common, commands::spaceform),
        Command::ConfsysResiduals => execute::<ConfsysConfig>(c, common, commands::confsys_residuals),
        Command::Coeffsys => execute::<CoeffsysConfig>(c, common, commands::coeffsys),
        Command::Probe => execute::<ProbeConfig>(c, common, commands::probe),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let json = report.to_json();
    match &cli.common.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &json) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{json}"),
    }
    let status = if report.passed { "pass" } else { "FAIL" };
    match &report.reason {
        Some(r) => eprintln!("{}: {status} ({r})", report.command),
        None => eprintln!("{}: {status}", report.command),
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
