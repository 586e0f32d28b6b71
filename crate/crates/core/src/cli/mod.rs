//! Experiment commands behind the `shrinkrisk` binary.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or I/O
//! error, 3 degenerate numerical instance.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    figure1_rows, phase_rows, risk_json, rmt_check_json, verify_json, write_figure1_csv, write_phase_csv, Figure1Row,
    PhaseRow, FIGURE1_HEADER, PHASE_HEADER,
};
pub use config::{grid, ExperimentConfig, Tuning};

use crate::error::Error;
use crate::linmodel::EntryLaw;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "shrinkrisk", version, about = "Conditional prediction risk of James–Stein-type estimators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Relative out-of-sample risk curves along Gram eigenvectors (CSV).
    Figure1,
    /// Worst-case phase diagram over (c, t) (CSV).
    Phase,
    /// Exact risks for a single instance (JSON).
    Risk,
    /// Marchenko–Pastur and integral-identity checks (JSON).
    RmtCheck,
    /// Full closed-form vs. Monte Carlo verification suite (JSON).
    Verify,
}

/// Command-line overrides; each flag carries the name of its config key.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long = "out", visible_alias = "out_path", global = true)]
    pub out_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub p: Option<usize>,
    /// `js` or a number.
    #[arg(long, global = true)]
    pub c: Option<Tuning>,
    #[arg(long = "asymptotic_c", alias = "asymptotic-c", global = true)]
    pub asymptotic_c: Option<Tuning>,
    #[arg(long = "sigma_ar1", alias = "sigma-ar1", global = true, allow_hyphen_values = true)]
    pub sigma_ar1: Option<f64>,
    #[arg(long = "entry_law", alias = "entry-law", global = true)]
    pub entry_law: Option<EntryLaw>,
    #[arg(long = "snr_min", alias = "snr-min", global = true)]
    pub snr_min: Option<f64>,
    #[arg(long = "snr_max", alias = "snr-max", global = true)]
    pub snr_max: Option<f64>,
    #[arg(long = "snr_points", alias = "snr-points", global = true)]
    pub snr_points: Option<usize>,
    #[arg(long = "snr_log", alias = "snr-log", global = true)]
    pub snr_log: Option<bool>,
    /// Comma-separated 1-based eigenvector indices.
    #[arg(long = "eigen_indices", alias = "eigen-indices", global = true, value_delimiter = ',')]
    pub eigen_indices: Option<Vec<usize>>,
    #[arg(long = "c_min", alias = "c-min", global = true)]
    pub c_min: Option<f64>,
    #[arg(long = "c_max", alias = "c-max", global = true)]
    pub c_max: Option<f64>,
    #[arg(long = "t_min", alias = "t-min", global = true)]
    pub t_min: Option<f64>,
    #[arg(long = "t_max", alias = "t-max", global = true)]
    pub t_max: Option<f64>,
    #[arg(long = "phase_points", alias = "phase-points", global = true)]
    pub phase_points: Option<usize>,
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    #[arg(long, global = true)]
    pub snr: Option<f64>,
    #[arg(long = "beta_index", alias = "beta-index", global = true)]
    pub beta_index: Option<usize>,
    #[arg(long = "rmt_n", alias = "rmt-n", global = true)]
    pub rmt_n: Option<usize>,
    #[arg(long = "rmt_p", alias = "rmt-p", global = true)]
    pub rmt_p: Option<usize>,
    /// Cross-check `risk` against Monte Carlo.
    #[arg(long, global = true)]
    pub verify: bool,
    /// Corrupts one term of the risk formula inside `verify`.
    #[arg(long = "inject_fault", alias = "inject-fault", global = true, hide = true)]
    pub inject_fault: bool,
}

impl Overrides {
    /// Loads the config file (if any) and applies flag overrides.
    pub fn resolve(&self) -> crate::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        apply!(
            seed, n, p, c, asymptotic_c, sigma_ar1, entry_law, snr_min, snr_max, snr_points, snr_log, eigen_indices,
            c_min, c_max, t_min, t_max, phase_points, reps, snr, beta_index, rmt_n, rmt_p
        );
        if self.out_path.is_some() {
            cfg.out_path = self.out_path.clone();
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.verify |= self.verify;
        cfg.inject_fault |= self.inject_fault;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DegenerateGram { .. } | Error::SingularGram => EXIT_DEGENERATE,
        _ => EXIT_CONFIG,
    }
}

fn write_output(cfg: &ExperimentConfig, bytes: &[u8]) -> crate::Result<()> {
    match &cfg.out_path {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

/// Runs one command under `cfg`; returns the process exit code.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> crate::Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Figure1 => {
            let rows = figure1_rows(cfg)?;
            let mut buf = Vec::new();
            write_figure1_csv(&mut buf, &rows)?;
            write_output(cfg, &buf)?;
            Ok(EXIT_OK)
        }
        Command::Phase => {
            let rows = phase_rows(cfg)?;
            let mut buf = Vec::new();
            write_phase_csv(&mut buf, &rows)?;
            write_output(cfg, &buf)?;
            Ok(EXIT_OK)
        }
        Command::Risk => {
            let (json, pass) = risk_json(cfg)?;
            write_output(cfg, &to_json_bytes(&json)?)?;
            Ok(if pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::RmtCheck => {
            let (json, pass) = rmt_check_json(cfg)?;
            write_output(cfg, &to_json_bytes(&json)?)?;
            Ok(if pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Verify => {
            let (json, pass) = verify_json(cfg)?;
            write_output(cfg, &to_json_bytes(&json)?)?;
            Ok(if pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
    })
}

fn to_json_bytes(v: &serde_json::Value) -> crate::Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let result = cli.overrides.resolve().and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
