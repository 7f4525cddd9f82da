//! `nmgeo` command-line driver.
//!
//! Exit codes: 0 success, 1 computation or I/O failure, 2 usage or
//! configuration error. Every run that parses as a subcommand also writes
//! `<out stem>.manifest.json`, including failed runs. If the config file
//! cannot be read, the manifest goes next to the output named by the flags.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::commands::{execute, Output};
use crate::config::{read_overrides, Command, ConfigError, Convention, Format, Overrides, RunConfig};
use crate::output::{
    write_boundaries_csv, write_boundaries_json, write_json, write_series_csv, write_series_json, write_sweep_csv,
    write_sweep_json,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker count (0 or unset: automatic).
pub const THREADS_ENV: &str = "NMGEO_THREADS";

#[derive(Parser, Debug)]
#[command(name = "nmgeo", version, about = "Geometric phase and non-Markovianity of a qubit in a lossy cavity")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// g(t) and g'(t) on a grid
    Gfun(Flags),
    /// Total, dynamical and geometric phases with divergence checks
    Phase(Flags),
    /// Master-equation evolution, ⟨σ⟩ and trace distance
    Dynamics(Flags),
    /// Trace-distance non-Markovianity N_t
    Nonmarkov(Flags),
    /// Quantum Fisher information of the initial-state angle
    Qfi(Flags),
    /// Phase-diagram sweep over (gamma_w, kappa)
    Sweep(Flags),
    /// Green, blue and tangency boundary curves
    Boundaries(Flags),
    /// Memory-less bath limit of g(t)
    MarkovLimit(Flags),
    /// Monte-Carlo reconstruction of the density matrix from trajectories
    Qsd(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat JSON file of settings; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    gamma_w: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega_c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega_w: Option<f64>,
    /// Bath coupling strength Γ_w
    #[arg(long, allow_negative_numbers = true)]
    bath_coupling: Option<f64>,
    /// Initial-state angle
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// start,stop,step
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gamma_range: Option<Vec<f64>>,
    /// start,stop,step
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    kappa_range: Option<Vec<f64>>,
    /// Number of trajectories
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Initial-state convention for qfi
    #[arg(long, value_enum)]
    convention: Option<Convention>,
}

fn triple(name: &str, v: Option<Vec<f64>>) -> Result<Option<[f64; 3]>, ConfigError> {
    v.map(|v| {
        <[f64; 3]>::try_from(v)
            .map_err(|v| ConfigError::Invalid(format!("--{name} takes start,stop,step; got {} values", v.len())))
    })
    .transpose()
}

impl Flags {
    fn overrides(self) -> Result<(Option<PathBuf>, Overrides), ConfigError> {
        let o = Overrides {
            gamma_w: self.gamma_w,
            kappa: self.kappa,
            omega: self.omega,
            omega_c: self.omega_c,
            omega_w: self.omega_w,
            bath_coupling: self.bath_coupling,
            theta: self.theta,
            t_max: self.t_max,
            dt: self.dt,
            gamma_range: triple("gamma-range", self.gamma_range)?,
            kappa_range: triple("kappa-range", self.kappa_range)?,
            n_traj: self.n_traj,
            seed: self.seed,
            out: self.out,
            format: self.format,
            convention: self.convention,
        };
        Ok((self.config, o))
    }
}

impl Sub {
    fn split(self) -> (Command, Flags) {
        match self {
            Sub::Gfun(f) => (Command::Gfun, f),
            Sub::Phase(f) => (Command::Phase, f),
            Sub::Dynamics(f) => (Command::Dynamics, f),
            Sub::Nonmarkov(f) => (Command::Nonmarkov, f),
            Sub::Qfi(f) => (Command::Qfi, f),
            Sub::Sweep(f) => (Command::Sweep, f),
            Sub::Boundaries(f) => (Command::Boundaries, f),
            Sub::MarkovLimit(f) => (Command::MarkovLimit, f),
            Sub::Qsd(f) => (Command::Qsd, f),
        }
    }
}

/// `<out>` with its extension replaced by `manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Worker count from [`THREADS_ENV`]; `Ok(None)` means automatic.
pub fn threads_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(ConfigError::Invalid(format!("{THREADS_ENV} must be a non-negative integer, got `{s}`"))),
        },
    }
}

struct Outcome {
    code: i32,
    error: Option<String>,
    results: Value,
}

fn write_manifest(
    path: &Path,
    command: Command,
    config: Option<&RunConfig>,
    threads: Option<usize>,
    started: Instant,
    outcome: &Outcome,
) {
    let manifest = json!({
        "command": command.name(),
        "status": if outcome.code == EXIT_OK { "ok" } else { "error" },
        "exit_code": outcome.code,
        "error": outcome.error,
        "config": config,
        "seed": config.map(|c| c.seed),
        "threads": threads,
        "versions": {
            "nmgeo": nmgeo::VERSION,
            "nmgeo-cli": env!("CARGO_PKG_VERSION"),
        },
        "wall_time_s": started.elapsed().as_secs_f64(),
        "results": outcome.results,
    });
    if let Err(e) = write_json(&manifest, path) {
        eprintln!("nmgeo: could not write manifest {}: {e}", path.display());
    }
}

fn write_output(cfg: &RunConfig, output: &Output) -> std::io::Result<()> {
    let path = cfg.out.as_path();
    match (output, cfg.format) {
        (Output::Series(t), Format::Csv) => write_series_csv(t, path),
        (Output::Series(t), Format::Json) => write_series_json(t, path),
        (Output::Sweep(r), Format::Csv) => write_sweep_csv(r, path),
        (Output::Sweep(r), Format::Json) => write_sweep_json(r, path),
        (Output::Boundaries(r), Format::Csv) => write_boundaries_csv(r, path),
        (Output::Boundaries(r), Format::Json) => write_boundaries_json(r, path),
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let started = Instant::now();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (command, flags) = cli.command.split();
    // Until the config file is read only the flags can name the output.
    let early = Overrides { out: flags.out.clone(), format: flags.format, ..Overrides::default() };
    let early_manifest = manifest_path(&early.out_path(command));
    let fail_early = |e: ConfigError| {
        let msg = e.to_string();
        eprintln!("nmgeo: {msg}");
        let outcome = Outcome { code: EXIT_USAGE, error: Some(msg), results: Value::Null };
        write_manifest(&early_manifest, command, None, None, started, &outcome);
        EXIT_USAGE
    };
    let (config_path, cli_overrides) = match flags.overrides() {
        Ok(v) => v,
        Err(e) => return fail_early(e),
    };
    let file = match config_path.as_deref().map(read_overrides).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => return fail_early(e),
    };
    let merged = file.layered(cli_overrides);
    let manifest = manifest_path(&merged.out_path(command));

    let fail = |code: i32, msg: String, cfg: Option<&RunConfig>, threads: Option<usize>| {
        eprintln!("nmgeo: {msg}");
        let outcome = Outcome { code, error: Some(msg), results: Value::Null };
        write_manifest(&manifest, command, cfg, threads, started, &outcome);
        code
    };

    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => return fail(EXIT_USAGE, e.to_string(), None, None),
    };
    let cfg = match RunConfig::resolve(command, merged) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_USAGE, e.to_string(), None, threads),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_COMPUTE, format!("thread pool: {e}"), Some(&cfg), threads),
    };

    let (output, results) = match pool.install(|| execute(&cfg)) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_COMPUTE, e.to_string(), Some(&cfg), threads),
    };
    if let Err(e) = write_output(&cfg, &output) {
        return fail(EXIT_COMPUTE, format!("writing {}: {e}", cfg.out.display()), Some(&cfg), threads);
    }
    let outcome = Outcome { code: EXIT_OK, error: None, results };
    write_manifest(&manifest, command, Some(&cfg), threads, started, &outcome);
    EXIT_OK
}
