use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::drive::TimeGrid;

/// Which computation produced a dissipation value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Spectral,
    KuboTime,
    KuboFreq,
    Propagator,
    ClosedForm,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::Spectral => "spectral",
            Route::KuboTime => "kubo_time",
            Route::KuboFreq => "kubo_freq",
            Route::Propagator => "propagator",
            Route::ClosedForm => "closed_form",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inputs and numerics behind a dissipation value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub n_max: Option<usize>,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub grid: Option<TimeGrid>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Meta {
    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }
}

/// Net change of the unperturbed energy once the drive has switched off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationResult {
    pub delta_e: f64,
    pub route: Route,
    /// Magnitude scale of the summed terms; positivity is judged against it.
    pub scale: f64,
    pub meta: Meta,
}

impl DissipationResult {
    pub fn new(delta_e: f64, route: Route, scale: f64) -> Self {
        Self {
            delta_e,
            route,
            scale,
            meta: Meta::default(),
        }
    }

    /// `delta_e >= -1e-10 * scale`
    pub fn is_nonnegative(&self) -> bool {
        self.delta_e >= -1e-10 * self.scale
    }

    pub(crate) fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.meta.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// `|a - b| / max(|a|, |b|, floor)`
pub fn relative_gap(a: f64, b: f64, floor: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(floor);
    if denom == 0.0 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}
