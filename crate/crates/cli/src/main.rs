//! `nemalimit` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort,
//! 4 acceptance failure (`report --assert`), 1 anything else.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use nemalimit::config::RunConfig;
use nemalimit::harness::{self, RateReport};
use nemalimit::spectral::{build_basis, check_condition_h, DEFAULT_H_TOLERANCE};
use nemalimit::{compressible, incompressible, output, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "nemalimit", version, about = "Low-Mach-number limit laboratory for nematic liquid-crystal flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mach parameter, overriding `params.epsilon`.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of nonconstant modes in the spectral basis.
    #[arg(long, default_value_t = 32)]
    modes: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Write the spectral table of the configured domain.
    Basis(Common),
    /// Report the boundary-trace condition of the retained modes.
    CheckH(Common),
    /// Run the compressible solver.
    RunComp(Common),
    /// Run the incompressible limit solver.
    RunInc(Common),
    /// Run the linear dissipative wave system and fit decay rates.
    Wave(Common),
    /// Run an epsilon sweep against the incompressible reference.
    Sweep(Common),
    /// Summarise a sweep report.
    Report {
        /// Sweep output directory or path to `report.json`.
        #[arg(long)]
        out: PathBuf,
        /// Exit with code 4 when any check failed.
        #[arg(long)]
        assert: bool,
    },
}

#[derive(Debug)]
struct AcceptanceFailure(usize);

impl std::fmt::Display for AcceptanceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} acceptance check(s) failed", self.0)
    }
}

impl std::error::Error for AcceptanceFailure {}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(e) = common.epsilon {
        cfg = cfg.with_epsilon(e)?;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Basis(c) => {
            let cfg = load(&c)?;
            let basis = build_basis(cfg.grid()?.domain, c.modes, cfg.params.mu)?;
            let mut buf = Vec::new();
            basis.write_csv(&mut buf)?;
            if c.out.is_some() {
                std::fs::create_dir_all(&cfg.output.dir)?;
                let path = cfg.output.dir.join("basis.csv");
                std::fs::write(&path, &buf).with_context(|| format!("writing {}", path.display()))?;
            } else {
                std::io::stdout().lock().write_all(&buf)?;
            }
        }
        Command::CheckH(c) => {
            let cfg = load(&c)?;
            let basis = build_basis(cfg.grid()?.domain, c.modes, cfg.params.mu)?;
            let report = check_condition_h(&basis, DEFAULT_H_TOLERANCE);
            if c.out.is_some() {
                std::fs::create_dir_all(&cfg.output.dir)?;
                std::fs::write(cfg.output.dir.join("condition_h.json"), serde_json::to_vec_pretty(&report)?)?;
            }
            print_json(&report)?;
        }
        Command::RunComp(c) => {
            let cfg = load(&c)?;
            let basis = build_basis(cfg.grid()?.domain, c.modes, cfg.params.mu)?;
            let result = compressible::run(&cfg, Some(&basis))?;
            output::write_run(&cfg.output.dir, "compressible", &cfg, &result)?;
            print_json(&result.diagnostics)?;
        }
        Command::RunInc(c) => {
            let cfg = load(&c)?;
            let result = incompressible::run(&cfg)?;
            output::write_run(&cfg.output.dir, "incompressible", &cfg, &result)?;
            print_json(&result.diagnostics)?;
        }
        Command::Wave(c) => {
            let cfg = load(&c)?;
            let (run, report) = harness::run_wave(&cfg, c.modes)?;
            output::write_wave(&cfg.output.dir, &cfg, &run, &report)?;
            print_json(&report)?;
        }
        Command::Sweep(c) => {
            let mut cfg = load(&c)?;
            let mut sweep = cfg.sweep.clone().unwrap_or_default();
            sweep.modes = c.modes;
            cfg.sweep = Some(sweep);
            cfg.validate()?;
            let out = harness::run_sweep(&cfg)?;
            output::write_sweep(&cfg.output.dir, &cfg, &out)?;
            summarise(&out.report)?;
        }
        Command::Report { out, assert } => {
            let path = if out.is_dir() { out.join("report.json") } else { out };
            let report = read_report(&path)?;
            summarise(&report)?;
            let failed = report.criteria.iter().filter(|c| !c.passed).count();
            if assert && failed > 0 {
                return Err(AcceptanceFailure(failed).into());
            }
        }
    }
    Ok(())
}

fn read_report(path: &Path) -> Result<RateReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RateReport::from_json(&text)?)
}

fn summarise(report: &RateReport) -> Result<()> {
    let mut out = std::io::stdout().lock();
    for f in &report.fits {
        match &f.fit {
            Some(fit) => writeln!(out, "slope {:<10} {:>8.4} (r = {:.4})", f.norm.label(), fit.slope, fit.correlation)?,
            None => writeln!(out, "slope {:<10} undefined", f.norm.label())?,
        }
    }
    for c in &report.criteria {
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<AcceptanceFailure>().is_some() {
        return EXIT_ACCEPTANCE;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) | Some(Error::Io { .. }) => EXIT_CONFIG,
        Some(Error::NumericalAbort { .. }) | Some(Error::StepRejected(_)) | Some(Error::InvalidState(_)) => EXIT_ABORT,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
