//! Run configuration: defaults, then a flat JSON file, then command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use nmgeo::dynamics::StateConvention;
use nmgeo::phasediagram::{AxisRange, SweepConfig, DEFAULT_T_MAX};
use nmgeo::{Grid, ModelParams};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Gfun,
    Phase,
    Dynamics,
    Nonmarkov,
    Qfi,
    Sweep,
    Boundaries,
    MarkovLimit,
    Qsd,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gfun => "gfun",
            Self::Phase => "phase",
            Self::Dynamics => "dynamics",
            Self::Nonmarkov => "nonmarkov",
            Self::Qfi => "qfi",
            Self::Sweep => "sweep",
            Self::Boundaries => "boundaries",
            Self::MarkovLimit => "markov-limit",
            Self::Qsd => "qsd",
        }
    }

    fn default_t_max(self) -> f64 {
        match self {
            Self::Nonmarkov | Self::Sweep => DEFAULT_T_MAX,
            Self::Qsd => 5.0,
            _ => 20.0,
        }
    }

    fn uses_time_grid(self) -> bool {
        !matches!(self, Self::Sweep | Self::Boundaries)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Bloch,
    #[default]
    Qfi,
}

impl From<Convention> for StateConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Bloch => StateConvention::Bloch,
            Convention::Qfi => StateConvention::QfiParameter,
        }
    }
}

/// Keys accepted in a config file; each mirrors the flag of the same name
/// with dashes turned into underscores.
pub const CONFIG_KEYS: &[&str] = &[
    "gamma_w",
    "kappa",
    "omega",
    "omega_c",
    "omega_w",
    "bath_coupling",
    "theta",
    "t_max",
    "dt",
    "gamma_range",
    "kappa_range",
    "n_traj",
    "seed",
    "out",
    "format",
    "convention",
];

/// Partially specified settings, from a file or from flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub gamma_w: Option<f64>,
    pub kappa: Option<f64>,
    pub omega: Option<f64>,
    pub omega_c: Option<f64>,
    pub omega_w: Option<f64>,
    pub bath_coupling: Option<f64>,
    pub theta: Option<f64>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub gamma_range: Option<[f64; 3]>,
    pub kappa_range: Option<[f64; 3]>,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub convention: Option<Convention>,
}

impl Overrides {
    /// `self` with every field that `top` sets replaced.
    pub fn layered(self, top: Overrides) -> Overrides {
        Overrides {
            gamma_w: top.gamma_w.or(self.gamma_w),
            kappa: top.kappa.or(self.kappa),
            omega: top.omega.or(self.omega),
            omega_c: top.omega_c.or(self.omega_c),
            omega_w: top.omega_w.or(self.omega_w),
            bath_coupling: top.bath_coupling.or(self.bath_coupling),
            theta: top.theta.or(self.theta),
            t_max: top.t_max.or(self.t_max),
            dt: top.dt.or(self.dt),
            gamma_range: top.gamma_range.or(self.gamma_range),
            kappa_range: top.kappa_range.or(self.kappa_range),
            n_traj: top.n_traj.or(self.n_traj),
            seed: top.seed.or(self.seed),
            out: top.out.or(self.out),
            format: top.format.or(self.format),
            convention: top.convention.or(self.convention),
        }
    }

    /// Output path after defaults: `<command>.<ext>`.
    pub fn out_path(&self, command: Command) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.{}", command.name(), self.format.unwrap_or_default().extension())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    Io { path: PathBuf, message: String },
    Parse { line: usize, column: usize, message: String },
    UnknownKey(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, message } => write!(f, "cannot read {}: {message}", path.display()),
            Self::Parse { line, column, message } => {
                write!(f, "config parse error at line {line}, column {column}: {message}")
            }
            Self::UnknownKey(k) => write!(f, "unknown config key `{k}`"),
            Self::Invalid(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses a flat JSON object of settings.
pub fn parse_overrides(text: &str) -> Result<Overrides, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| ConfigError::Invalid("config must be a JSON object".into()))?;
    if let Some(k) = obj.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(k.clone()));
    }
    serde_json::from_value(value).map_err(|e| ConfigError::Invalid(e.to_string()))
}

pub fn read_overrides(path: &Path) -> Result<Overrides, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    parse_overrides(&text)
}

/// Fully resolved and validated settings for one invocation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub params: ModelParams,
    pub theta: f64,
    pub t_max: f64,
    pub dt: f64,
    pub sweep: SweepConfig,
    pub n_traj: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub convention: Convention,
}

impl RunConfig {
    /// Applies defaults to `o` and validates everything the command will use.
    pub fn resolve(command: Command, o: Overrides) -> Result<Self, ConfigError> {
        let base = ModelParams::default();
        let params = ModelParams {
            omega: o.omega.unwrap_or(base.omega),
            omega_c: o.omega_c.unwrap_or(base.omega_c),
            omega_w: o.omega_w.unwrap_or(base.omega_w),
            kappa: o.kappa.unwrap_or(base.kappa),
            gamma_w: if command == Command::MarkovLimit {
                f64::INFINITY
            } else {
                o.gamma_w.unwrap_or(base.gamma_w)
            },
            bath_coupling: o.bath_coupling.unwrap_or(base.bath_coupling),
        };
        let defaults = SweepConfig::default();
        let axis = |r: Option<[f64; 3]>, d: AxisRange, name: &str| -> Result<AxisRange, ConfigError> {
            let [a, b, s] = r.unwrap_or([d.start, d.stop, d.step]);
            AxisRange::new(a, b, s).map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))
        };
        let t_max = o.t_max.unwrap_or(command.default_t_max());
        let cfg = RunConfig {
            command,
            params,
            theta: o.theta.unwrap_or(std::f64::consts::FRAC_PI_4),
            t_max,
            dt: o.dt.unwrap_or(0.01),
            sweep: SweepConfig {
                gamma_w: axis(o.gamma_range, defaults.gamma_w, "gamma_range")?,
                kappa: axis(o.kappa_range, defaults.kappa, "kappa_range")?,
                t_max,
            },
            n_traj: o.n_traj.unwrap_or(20_000),
            seed: o.seed.unwrap_or(0),
            out: o.out_path(command),
            format: o.format.unwrap_or_default(),
            convention: o.convention.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: nmgeo::Error| ConfigError::Invalid(e.to_string());
        self.params.validate().map_err(invalid)?;
        if !(0.0..=std::f64::consts::PI).contains(&self.theta) {
            return Err(invalid(nmgeo::Error::OutOfRangeAngle(self.theta)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(ConfigError::Invalid(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.command.uses_time_grid() {
            self.grid()?;
        }
        if self.command == Command::Qsd {
            if self.n_traj < nmgeo::qsd::MIN_TRAJECTORIES {
                return Err(ConfigError::Invalid(format!(
                    "n_traj must be at least {}, got {}",
                    nmgeo::qsd::MIN_TRAJECTORIES,
                    self.n_traj
                )));
            }
            if self.params.gamma_w * self.dt >= 0.1 {
                return Err(ConfigError::Invalid("qsd needs gamma_w*dt < 0.1".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::span(self.t_max, self.dt).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Defaults + file at `path` for `command`.
pub fn load_config(path: &Path, command: Command) -> Result<RunConfig, ConfigError> {
    RunConfig::resolve(command, read_overrides(path)?)
}
