//! `llb` — command-line front end for the stochastic magnetisation lab.
//!
//! One subcommand per experiment. Settings come from an optional
//! `key = value` config file; a handful of flags override the file.
//! Reports land in the output directory as CSV or JSON.
//!
//! Exit codes: 0 on success (including a passing identity audit), 1 on
//! I/O failures or a failing identity audit, 2 on configuration errors,
//! 3 when a trajectory blows up (an error report is still written).

use clap::{Parser, Subcommand};
use llb::config::{parse_config, serialize_config, ExperimentConfig, ExperimentKind};
use llb::error::LlbError;
use llb::experiment::{run, ExperimentReport};
use llb::report::{experimental_note, write_error_report, write_report, ReportFormat};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "llb",
    version,
    about = "Numerical laboratory for a damped stochastic magnetisation equation",
    after_help = "Config files use `key = value` lines with `#` comments; \
                  run `llb print-config` for the full key set with defaults."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to a `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory for reports.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Report format: csv or json.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<ReportFormat>,

    /// Worker thread count (results never depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate an ensemble and audit means, energy balance, and tightness.
    Ensemble,
    /// Check the noise-killed linear run against closed-form variances.
    Oracle,
    /// Re-run one noise realization on nested domains and compare.
    Expand,
    /// Vary the noise intensity and measure path and measure responses.
    Sweep,
    /// Fuzz the exact algebraic and cut-off identities.
    Identities,
    /// Perturb the initial data and measure the amplification.
    Continuity,
    /// Print the effective configuration in config-file form.
    PrintConfig,
}

impl Command {
    fn kind(&self) -> Option<ExperimentKind> {
        match self {
            Command::Ensemble => Some(ExperimentKind::Ensemble),
            Command::Oracle => Some(ExperimentKind::Oracle),
            Command::Expand => Some(ExperimentKind::Expand),
            Command::Sweep => Some(ExperimentKind::Sweep),
            Command::Identities => Some(ExperimentKind::Identities),
            Command::Continuity => Some(ExperimentKind::Continuity),
            Command::PrintConfig => None,
        }
    }
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    ReportFormat::parse(s).ok_or_else(|| format!("expected csv or json, got {s:?}"))
}

fn main() -> ExitCode {
    ExitCode::from(real_main())
}

fn real_main() -> u8 {
    let cli = Cli::parse();

    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if let Some(kind) = cli.command.kind() {
        cfg.kind = kind;
    }
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(format) = cli.format {
        cfg.output_format = format;
    }

    if matches!(cli.command, Command::PrintConfig) {
        print!("{}", serialize_config(&cfg));
        return 0;
    }

    if let Some(note) = experimental_note(cfg.sim.dim) {
        eprintln!("note: {note}");
    }

    let out_dir = PathBuf::from(&cfg.output_dir);
    match run(&cfg, cli.threads) {
        Ok(report) => finish(&out_dir, cfg.output_format, &report),
        Err(err) => fail(&out_dir, cfg.kind, &err),
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, u8> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("error: cannot read {}: {err}", path.display());
            return Err(1);
        }
    };
    match parse_config(&text) {
        Ok(cfg) => Ok(cfg),
        Err(errors) => {
            for e in &errors {
                eprintln!("config error: {e}");
            }
            Err(2)
        }
    }
}

fn finish(out_dir: &Path, format: ReportFormat, report: &ExperimentReport) -> u8 {
    let path = match write_report(out_dir, report.stem(), format, report) {
        Ok(path) => path,
        Err(err) => {
            eprintln!("error: {err}");
            return 1;
        }
    };
    if let ExperimentReport::Identities(r) = report {
        for f in &r.families {
            let verdict = if f.passed { "PASS" } else { "FAIL" };
            println!(
                "{:<26} {} (worst {:.3e}, allowed {:.1e})",
                f.name, verdict, f.worst_residual, f.threshold
            );
        }
    }
    println!("wrote {}", path.display());
    match report.verdict() {
        Some(false) => {
            eprintln!("error: identity audit failed");
            1
        }
        _ => 0,
    }
}

fn fail(out_dir: &Path, kind: ExperimentKind, err: &LlbError) -> u8 {
    eprintln!("error: {err}");
    match err {
        LlbError::Blowup { .. } => {
            match write_error_report(out_dir, kind.name(), err) {
                Ok(path) => eprintln!("wrote {}", path.display()),
                Err(io) => eprintln!("error: could not write error report: {io}"),
            }
            3
        }
        LlbError::InvalidParameter { .. }
        | LlbError::InvalidGrid(_)
        | LlbError::GridMismatch(_)
        | LlbError::EmptyInput(_) => 2,
        LlbError::Io(_) => 1,
    }
}
