//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, list values are comma
//! separated. Later assignments (and `--set` overrides) replace earlier ones.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cfl_core::kubo::Convolution;

use crate::error::{io_error, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Compare,
    SweepTemperature,
    SweepDetuning,
    SweepEta,
    Propagate,
    AuditCounterRotating,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Compare,
        Experiment::SweepTemperature,
        Experiment::SweepDetuning,
        Experiment::SweepEta,
        Experiment::Propagate,
        Experiment::AuditCounterRotating,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Compare => "compare",
            Experiment::SweepTemperature => "sweep-temperature",
            Experiment::SweepDetuning => "sweep-detuning",
            Experiment::SweepEta => "sweep-eta",
            Experiment::Propagate => "propagate",
            Experiment::AuditCounterRotating => "audit-counter-rotating",
        }
    }
}

impl FromStr for Experiment {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveKind {
    RampExp,
    Gaussian,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Rwa,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(CliError::Config(format!("format must be csv or json, got {s:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteName {
    Spectral,
    KuboFreq,
    KuboTime,
    ClosedForm,
    Propagator,
}

impl RouteName {
    pub fn name(&self) -> &'static str {
        match self {
            RouteName::Spectral => "spectral",
            RouteName::KuboFreq => "kubo_freq",
            RouteName::KuboTime => "kubo_time",
            RouteName::ClosedForm => "closed_form",
            RouteName::Propagator => "propagator",
        }
    }
}

pub const KEYS: [&str; 22] = [
    "experiment",
    "omega1",
    "omega2",
    "beta",
    "temperatures",
    "gamma",
    "eta",
    "drive",
    "tau",
    "center",
    "drive_file",
    "coupling",
    "n_max",
    "dt",
    "horizon",
    "convolution",
    "half_width",
    "points",
    "etas",
    "routes",
    "out",
    "format",
];

/// Fully resolved experiment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub omega1: f64,
    pub omega2: f64,
    /// Inverse temperature; `inf` is the ground state.
    pub beta: f64,
    /// `sweep-temperature` points, `T = 1/beta`; `0` is allowed.
    pub temperatures: Vec<f64>,
    pub gamma: f64,
    pub eta: f64,
    pub drive: DriveKind,
    pub tau: f64,
    pub center: f64,
    pub drive_file: Option<PathBuf>,
    pub coupling: Coupling,
    /// `None` chooses the truncation from the thermal tail.
    pub n_max: Option<usize>,
    pub dt: f64,
    /// `None` covers the drive support.
    pub horizon: Option<(f64, f64)>,
    pub convolution: Convolution,
    /// Detuning half-width in units of `eta`.
    pub half_width: f64,
    pub points: usize,
    pub etas: Vec<f64>,
    pub routes: Vec<RouteName>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Ordered raw assignments, before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {body:?}", i + 1)))?;
            raw.set(k.trim(), v.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(raw)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> CliResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {assignment:?}")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Resolves defaults and validates.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let experiment: Experiment = self
            .get("experiment")
            .ok_or_else(|| CliError::Config("no experiment given".into()))?
            .parse()?;
        let num = |key: &str, default: f64| -> CliResult<f64> {
            match self.get(key) {
                None => Ok(default),
                Some(v) => parse_f64(key, v),
            }
        };
        let list = |key: &str, default: &[f64]| -> CliResult<Vec<f64>> {
            match self.get(key) {
                None => Ok(default.to_vec()),
                Some(v) => v.split(',').map(|x| parse_f64(key, x.trim())).collect(),
            }
        };
        let drive = match self.get("drive").unwrap_or("ramp_exp") {
            "ramp_exp" => DriveKind::RampExp,
            "gaussian" => DriveKind::Gaussian,
            "tabulated" => DriveKind::Tabulated,
            other => return Err(CliError::Config(format!("drive must be ramp_exp, gaussian or tabulated, got {other:?}"))),
        };
        let coupling = match self.get("coupling").unwrap_or("rwa") {
            "rwa" => Coupling::Rwa,
            "full" => Coupling::Full,
            other => return Err(CliError::Config(format!("coupling must be rwa or full, got {other:?}"))),
        };
        let convolution = match self.get("convolution").unwrap_or("recursive") {
            "recursive" => Convolution::Recursive,
            "direct" => Convolution::Direct,
            other => return Err(CliError::Config(format!("convolution must be recursive or direct, got {other:?}"))),
        };
        let n_max = match self.get("n_max").unwrap_or("auto") {
            "auto" => None,
            v => Some(
                v.parse::<usize>()
                    .map_err(|_| CliError::Config(format!("n_max: expected an integer or auto, got {v:?}")))?,
            ),
        };
        let horizon = match self.get("horizon").unwrap_or("auto") {
            "auto" => None,
            v => {
                let parts: Vec<f64> = v.split(',').map(|x| parse_f64("horizon", x.trim())).collect::<CliResult<_>>()?;
                match parts[..] {
                    [a, b] => Some((a, b)),
                    _ => return Err(CliError::Config(format!("horizon: expected t_start,t_end or auto, got {v:?}"))),
                }
            }
        };
        let points = match self.get("points") {
            None => 201,
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("points: expected an integer, got {v:?}")))?,
        };
        let routes = match self.get("routes") {
            None => vec![RouteName::Spectral, RouteName::KuboFreq, RouteName::KuboTime],
            Some(v) => v
                .split(',')
                .map(|r| match r.trim() {
                    "spectral" => Ok(RouteName::Spectral),
                    "kubo_freq" => Ok(RouteName::KuboFreq),
                    "kubo_time" => Ok(RouteName::KuboTime),
                    "closed_form" => Ok(RouteName::ClosedForm),
                    "propagator" => Ok(RouteName::Propagator),
                    other => Err(CliError::Config(format!("unknown route {other:?}"))),
                })
                .collect::<CliResult<_>>()?,
        };
        let cfg = ExperimentConfig {
            experiment,
            omega1: num("omega1", 1.0)?,
            omega2: num("omega2", 1.1)?,
            beta: num("beta", 1.0)?,
            temperatures: list("temperatures", &[2.0, 1.0, 0.5, 0.25, 0.1, 0.0])?,
            gamma: num("gamma", 1.0)?,
            eta: num("eta", 0.1)?,
            drive,
            tau: num("tau", 2.0)?,
            center: num("center", 0.0)?,
            drive_file: self.get("drive_file").map(PathBuf::from),
            coupling,
            n_max,
            dt: num("dt", 0.01)?,
            horizon,
            convolution,
            half_width: num("half_width", 10.0)?,
            points,
            etas: list("etas", &[0.04, 0.02, 0.01])?,
            routes,
            out: self.get("out").map(PathBuf::from),
            format: self.get("format").unwrap_or("csv").parse()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    v.parse::<f64>()
        .map_err(|_| CliError::Config(format!("{key}: expected a number, got {v:?}")))
}

impl ExperimentConfig {
    fn validate(&self) -> CliResult<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CliError::Config(format!("{key} must be finite and > 0, got {v}")))
            }
        };
        positive("omega1", self.omega1)?;
        positive("omega2", self.omega2)?;
        positive("eta", self.eta)?;
        positive("tau", self.tau)?;
        positive("dt", self.dt)?;
        positive("half_width", self.half_width)?;
        if !(self.beta > 0.0) {
            return Err(CliError::Config(format!("beta must be > 0 (inf allowed), got {}", self.beta)));
        }
        if !self.gamma.is_finite() || !self.center.is_finite() {
            return Err(CliError::Config("gamma and center must be finite".into()));
        }
        if self.temperatures.is_empty() || self.temperatures.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(CliError::Config("temperatures must be a nonempty list of finite values >= 0".into()));
        }
        if self.etas.is_empty() || self.etas.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(CliError::Config("etas must be a nonempty list of finite values > 0".into()));
        }
        if self.n_max == Some(0) {
            return Err(CliError::Config("n_max must be >= 1".into()));
        }
        if self.points < 3 || self.points % 2 == 0 {
            return Err(CliError::Config(format!("points must be odd and >= 3, got {}", self.points)));
        }
        if let Some((a, b)) = self.horizon {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(CliError::Config(format!("horizon needs t_start < t_end, got {a},{b}")));
            }
        }
        if self.drive == DriveKind::Tabulated && self.drive_file.is_none() {
            return Err(CliError::Config("drive = tabulated needs drive_file".into()));
        }
        if self.routes.is_empty() {
            return Err(CliError::Config("routes must not be empty".into()));
        }
        Ok(())
    }

    /// Every resolved parameter, as written to the metadata sidecar.
    pub fn inputs(&self) -> BTreeMap<String, String> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("experiment", self.experiment.name().into());
        put("omega1", self.omega1.to_string());
        put("omega2", self.omega2.to_string());
        put("beta", self.beta.to_string());
        put("temperatures", join(&self.temperatures));
        put("gamma", self.gamma.to_string());
        put("eta", self.eta.to_string());
        put(
            "drive",
            match self.drive {
                DriveKind::RampExp => "ramp_exp",
                DriveKind::Gaussian => "gaussian",
                DriveKind::Tabulated => "tabulated",
            }
            .into(),
        );
        put("tau", self.tau.to_string());
        put("center", self.center.to_string());
        put(
            "drive_file",
            self.drive_file.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        put(
            "coupling",
            match self.coupling {
                Coupling::Rwa => "rwa",
                Coupling::Full => "full",
            }
            .into(),
        );
        put("n_max", self.n_max.map(|n| n.to_string()).unwrap_or_else(|| "auto".into()));
        put("dt", self.dt.to_string());
        put(
            "horizon",
            self.horizon.map(|(a, b)| format!("{a},{b}")).unwrap_or_else(|| "auto".into()),
        );
        put(
            "convolution",
            match self.convolution {
                Convolution::Recursive => "recursive",
                Convolution::Direct => "direct",
            }
            .into(),
        );
        put("half_width", self.half_width.to_string());
        put("points", self.points.to_string());
        put("etas", join(&self.etas));
        put(
            "routes",
            self.routes.iter().map(|r| r.name()).collect::<Vec<_>>().join(","),
        );
        put("out", self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("format", self.format.to_string());
        m
    }
}
