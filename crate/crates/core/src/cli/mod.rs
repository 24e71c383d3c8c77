//! Batch command line: `fracdisp <command> --config <path> [--out <dir>]
//! [--threads N] [--tol X]`.
//!
//! Exit codes: 0 when every check passes or is flagged, 2 when any check
//! fails, 3 for configuration errors and 1 for I/O errors.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use output::{publish, Manifest, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fracdisp", version, about = "Dispersive kernel verification on hyperbolic spaces and homogeneous trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Stationary points of the hyperbolic (and optionally tree) phase over a grid.
    PhaseReport(Common),
    /// Kernel values with regime tags and theorem ratios over a (t, r) grid.
    HnKernel(Common),
    /// Per-regime kernel verification, fixed-radius decay and Kunze-Stein norm decay.
    HnVerify(Common),
    /// Tree kernel identity, unitarity, uniform bound and decay slopes.
    TreeVerify(Common),
    /// Split-step nonlinear evolution on a homogeneous tree.
    NlsRun(Common),
    /// Rasterized admissible exponent regions.
    Regions(Common),
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV payloads and manifest.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the internal pool.
    #[arg(long, env = "FRACDISP_THREADS")]
    threads: Option<usize>,
    /// Override the configuration's tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PhaseReport(_) => "phase-report",
            Command::HnKernel(_) => "hn-kernel",
            Command::HnVerify(_) => "hn-verify",
            Command::TreeVerify(_) => "tree-verify",
            Command::NlsRun(_) => "nls-run",
            Command::Regions(_) => "regions",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::PhaseReport(c)
            | Command::HnKernel(c)
            | Command::HnVerify(c)
            | Command::TreeVerify(c)
            | Command::NlsRun(c)
            | Command::Regions(c) => c,
        }
    }

    /// The configuration key that `--tol` replaces.
    fn tol_key(&self) -> Option<&'static str> {
        match self {
            Command::PhaseReport(_) | Command::HnKernel(_) | Command::HnVerify(_) | Command::TreeVerify(_) => Some("tol"),
            Command::NlsRun(_) => Some("mass_drift_tol"),
            Command::Regions(_) => None,
        }
    }
}

fn parse<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

/// Parse, validate and run one command, returning the outcome and the
/// effective configuration (defaults filled in) for the manifest.
fn execute(cmd: &Command, raw: serde_json::Value) -> Result<(Outcome, serde_json::Value), CliError> {
    fn echo<T: Serialize>(cfg: &T) -> serde_json::Value {
        serde_json::to_value(cfg).expect("configurations serialize")
    }
    Ok(match cmd {
        Command::PhaseReport(_) => {
            let c: config::PhaseReportConfig = parse(raw)?;
            c.validate()?;
            (commands::phase_report(&c), echo(&c))
        }
        Command::HnKernel(_) => {
            let c: config::HnKernelConfig = parse(raw)?;
            c.validate()?;
            (commands::hn_kernel(&c), echo(&c))
        }
        Command::HnVerify(_) => {
            let c: config::HnVerifyConfig = parse(raw)?;
            c.validate()?;
            (commands::hn_verify(&c), echo(&c))
        }
        Command::TreeVerify(_) => {
            let c: config::TreeVerifyConfig = parse(raw)?;
            c.validate()?;
            (commands::tree_verify(&c), echo(&c))
        }
        Command::NlsRun(_) => {
            let c: config::NlsRunConfig = parse(raw)?;
            c.validate()?;
            (commands::nls_run(&c), echo(&c))
        }
        Command::Regions(_) => {
            let c: config::RegionsConfig = parse(raw)?;
            c.validate()?;
            (commands::regions(&c), echo(&c))
        }
    })
}

fn run_command(cmd: &Command) -> Result<Manifest, CliError> {
    let common = cmd.common();
    let mut raw: serde_json::Value = config::load(&common.config)?;
    if let Some(tol) = common.tol {
        let key = cmd.tol_key().ok_or_else(|| CliError::Config(format!("{} has no tolerance to override", cmd.name())))?;
        let obj = raw.as_object_mut().ok_or_else(|| CliError::Config("configuration must be a JSON object".into()))?;
        obj.insert(key.into(), serde_json::json!(tol));
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let start = Instant::now();
    let (outcome, effective) = execute(cmd, raw)?;
    publish(&common.out, cmd.name(), effective, &outcome, start.elapsed().as_secs_f64())
}

/// Run the command line `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(&cli.command) {
        Ok(manifest) => {
            for c in &manifest.checks {
                println!("{:<8} {}: {}", format!("{:?}", c.status).to_uppercase(), c.name, c.detail);
            }
            if manifest.checks.iter().any(|c| c.status == output::Status::Fail) {
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("fracdisp: {e}");
            e.exit_code()
        }
    }
}
