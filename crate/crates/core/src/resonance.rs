//! Dissipation near resonance of the two modes under the rotating-wave
//! coupling and a slowly switched-off ramp.
//!
//! For `eta -> 0` the detuning dependence collapses onto
//!
//! ```text
//! dE = W delta(w1 - w2),   W = pi beta gamma^2 / (8 eta sinh^2(beta w1 / 2))
//! ```
//!
//! Pointwise we use the nascent delta that the ramp's power spectrum
//! actually produces, `delta_eta(w) = (2 eta / pi) w^2 / (eta^2 + w^2)^2`.
//! At exact resonance every coupled pair is degenerate and the finite-eta
//! spectral value is exactly zero, so "on resonance" quantities are always
//! detuning-integrated weights.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::drive::DriveSignal;
use crate::error::{invalid, Error, Result};
use crate::fockspace::{build_basis, rwa_coupling, OscillatorSpec};
use crate::par::map_slice;
use crate::result::{relative_gap, DissipationResult, Meta, Route};
use crate::spectral;
use crate::table::Table;
use crate::thermal::make_ensemble;

/// Population left above the truncation must stay below this.
pub const TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceConfig {
    pub omega1: f64,
    pub omega2: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl ResonanceConfig {
    pub fn new(omega1: f64, omega2: f64, beta: f64, gamma: f64, eta: f64) -> Result<Self> {
        for (name, v) in [("omega1", omega1), ("omega2", omega2), ("eta", eta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if beta.is_nan() || beta <= 0.0 {
            return Err(invalid("beta", format!("must be > 0 or +inf, got {beta}")));
        }
        if !gamma.is_finite() {
            return Err(invalid("gamma", format!("must be finite, got {gamma}")));
        }
        Ok(Self {
            omega1,
            omega2,
            beta,
            gamma,
            eta,
        })
    }

    pub fn with_omega2(&self, omega2: f64) -> Self {
        Self { omega2, ..*self }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self { eta, ..*self }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..*self }
    }

    pub fn drive(&self) -> Result<DriveSignal> {
        DriveSignal::ramp_exp(self.gamma, self.eta)
    }
}

/// `(2 eta / pi) w^2 / (eta^2 + w^2)^2`
pub fn delta_kernel(eta: f64, omega: f64) -> f64 {
    let d = eta * eta + omega * omega;
    2.0 * eta / PI * omega * omega / (d * d)
}

/// Exact mass of [`delta_kernel`] on `[-half_width, half_width]`.
pub fn kernel_mass(eta: f64, half_width: f64) -> f64 {
    let x = half_width / eta;
    2.0 / PI * (x.atan() - x / (1.0 + x * x))
}

/// Integrates `f` over the real line with `w = scale tan(theta)` and
/// composite 5-point Gauss-Legendre panels in `theta`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, scale: f64, panels: usize) -> f64 {
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let width = PI / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = -0.5 * PI + (p as f64 + 0.5) * width;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            let theta = mid + 0.5 * width * x;
            let c = theta.cos();
            total += w * 0.5 * width * f(scale * theta.tan()) * scale / (c * c);
        }
    }
    total
}

/// Numerical `int delta_eta(w) dw`; should be 1.
pub fn kernel_normalization(eta: f64) -> f64 {
    integrate_real_line(|w| delta_kernel(eta, w), eta, 64)
}

/// Coefficient `W` of `delta(w1 - w2)`; zero at zero temperature.
pub fn closed_form_weight(config: &ResonanceConfig) -> f64 {
    if config.beta.is_infinite() {
        return 0.0;
    }
    let s = (0.5 * config.beta * config.omega1).sinh();
    PI * config.beta * config.gamma * config.gamma / (8.0 * config.eta * s * s)
}

/// `W delta_eta(w1 - w2)`, with `W` recorded in the metadata.
pub fn delta_e_closed_form(config: &ResonanceConfig) -> DissipationResult {
    let weight = closed_form_weight(config);
    let kernel = delta_kernel(config.eta, config.omega1 - config.omega2);
    let mut out = DissipationResult::new(weight * kernel, Route::ClosedForm, (weight * kernel).abs());
    out.meta = Meta {
        beta: Some(config.beta),
        eta: Some(config.eta),
        ..Meta::default()
    };
    out.with_diagnostic("weight", weight)
        .with_diagnostic("kernel", kernel)
}

/// Smallest `n_max` leaving less than `tol` of a mode with frequency
/// `omega_min` above the truncation.
pub fn required_n_max(beta: f64, omega_min: f64, tol: f64) -> usize {
    if beta.is_infinite() {
        return 1;
    }
    let levels = (tol.ln() / (-beta * omega_min)).ceil().max(2.0) as usize;
    levels - 1
}

fn truncation_tail(beta: f64, omega: f64, n_max: usize) -> f64 {
    if beta.is_infinite() {
        0.0
    } else {
        (-beta * omega * (n_max + 1) as f64).exp()
    }
}

/// Detuning grid for a sweep, in units of `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningSweep {
    pub half_width: f64,
    /// Odd, for Simpson's rule.
    pub points: usize,
    pub n_max: Option<usize>,
}

impl Default for DetuningSweep {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            points: 201,
            n_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningRow {
    /// `omega2 - omega1`
    pub detuning: f64,
    pub spectral: f64,
    pub closed_form: f64,
    pub rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceComparison {
    pub config: ResonanceConfig,
    pub n_max: usize,
    pub rows: Vec<DetuningRow>,
    /// `W`
    pub weight: f64,
    /// Mass of `delta_eta` inside the sweep window.
    pub window_mass: f64,
    /// Simpson integral of the spectral values over the window.
    pub integrated_spectral: f64,
    /// `integrated_spectral + W (1 - window_mass)`: window integral completed
    /// with the closed-form tails outside it.
    pub completed_weight: f64,
    /// `completed_weight / W`
    pub weight_ratio: f64,
    /// Largest pointwise `rel_gap` for `0 < |detuning| <= eta`.
    pub near_resonance_gap: f64,
}

impl ResonanceComparison {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["detuning", "delta_e_spectral", "delta_e_closed_form", "rel_gap"]);
        for r in &self.rows {
            t.push_numeric(&[r.detuning, r.spectral, r.closed_form, r.rel_gap]);
        }
        t
    }

    /// Spectral value at `detuning` and at `-detuning` (nearest sweep points).
    pub fn mirror_pair(&self, detuning: f64) -> (f64, f64) {
        let nearest = |d: f64| {
            self.rows
                .iter()
                .min_by(|a, b| (a.detuning - d).abs().total_cmp(&(b.detuning - d).abs()))
                .map(|r| r.spectral)
                .unwrap_or(f64::NAN)
        };
        (nearest(detuning), nearest(-detuning))
    }
}

fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    debug_assert!(n % 2 == 1 && n >= 3);
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Sweeps `omega2 - omega1` over `[-L eta, L eta]` with the full finite-eta
/// spectral machinery and compares it with the regularized closed form.
pub fn compare_routes_near_resonance(
    config: &ResonanceConfig,
    sweep: &DetuningSweep,
) -> Result<ResonanceComparison> {
    if sweep.points < 3 || sweep.points % 2 == 0 {
        return Err(invalid("points", format!("need an odd count >= 3, got {}", sweep.points)));
    }
    if !(sweep.half_width > 0.0) {
        return Err(invalid("half_width", "must be > 0"));
    }
    let eta = config.eta;
    let span = sweep.half_width * eta;
    let omega_min = config.omega1 - span;
    if omega_min <= 0.0 {
        return Err(invalid("half_width", "sweep reaches non-positive omega2"));
    }
    let n_max = sweep
        .n_max
        .unwrap_or_else(|| required_n_max(config.beta, omega_min.min(config.omega1), TAIL_TOL));
    let tail = truncation_tail(config.beta, omega_min.min(config.omega1), n_max);
    if tail > TAIL_TOL {
        return Err(Error::Truncation {
            n_max,
            detail: format!("population tail {tail:e} above {TAIL_TOL:e}"),
        });
    }

    let spec1 = OscillatorSpec::with_omega(config.omega1)?;
    let template = build_basis(&spec1, &spec1, n_max)?;
    let coupling = rwa_coupling(&template);
    let signal = config.drive()?;
    let weight = closed_form_weight(config);

    let step = 2.0 * span / (sweep.points - 1) as f64;
    let detunings: Vec<f64> = (0..sweep.points)
        .map(|i| -span + i as f64 * step)
        .collect();
    let rows = map_slice(&detunings, |&d| -> Result<DetuningRow> {
        let spec2 = OscillatorSpec::with_omega(config.omega1 + d)?;
        let basis = build_basis(&spec1, &spec2, n_max)?;
        let ensemble = make_ensemble(&basis, config.beta)?;
        let value = spectral::delta_e(&coupling, &signal, &ensemble, &basis)?.delta_e;
        let closed = weight * delta_kernel(eta, d);
        Ok(DetuningRow {
            detuning: d,
            spectral: value,
            closed_form: closed,
            rel_gap: relative_gap(value, closed, 0.0),
        })
    });
    let rows: Vec<DetuningRow> = rows.into_iter().collect::<Result<_>>()?;

    let integrated_spectral = simpson(&rows.iter().map(|r| r.spectral).collect::<Vec<_>>(), step);
    let window_mass = kernel_mass(eta, span);
    let completed_weight = integrated_spectral + weight * (1.0 - window_mass);
    let weight_ratio = if weight == 0.0 {
        if completed_weight == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        completed_weight / weight
    };
    let near_resonance_gap = rows
        .iter()
        .filter(|r| r.detuning != 0.0 && r.detuning.abs() <= eta * (1.0 + 1e-12))
        .map(|r| r.rel_gap)
        .fold(0.0, f64::max);
    Ok(ResonanceComparison {
        config: *config,
        n_max,
        rows,
        weight,
        window_mass,
        integrated_spectral,
        completed_weight,
        weight_ratio,
        near_resonance_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub eta: f64,
    /// Detuning-integrated spectral dissipation divided by the window
    /// mass: the resonance weight at this `eta`.
    pub delta_e: f64,
    pub eta_times_delta_e: f64,
    pub closed_form_weight: f64,
}

/// Resonance weight for each `eta`; expected to scale as `1/eta`.
pub fn eta_scaling_study(
    config: &ResonanceConfig,
    etas: &[f64],
    sweep: &DetuningSweep,
) -> Result<Vec<EtaRow>> {
    if etas.is_empty() {
        return Err(invalid("eta", "need at least one value"));
    }
    let widest = etas.iter().copied().fold(0.0, f64::max);
    let n_max = sweep.n_max.unwrap_or_else(|| {
        required_n_max(config.beta, config.omega1 - sweep.half_width * widest, TAIL_TOL)
    });
    let fixed = DetuningSweep {
        n_max: Some(n_max),
        ..*sweep
    };
    etas.iter()
        .map(|&eta| {
            let c = config.with_eta(eta);
            let cmp = compare_routes_near_resonance(&c, &fixed)?;
            let delta_e = cmp.integrated_spectral / cmp.window_mass;
            Ok(EtaRow {
                eta,
                delta_e,
                eta_times_delta_e: eta * delta_e,
                closed_form_weight: cmp.weight,
            })
        })
        .collect()
}

pub fn eta_table(rows: &[EtaRow]) -> Table {
    let mut t = Table::new(&["eta", "delta_e", "eta_times_delta_e", "closed_form_weight"]);
    for r in rows {
        t.push_numeric(&[r.eta, r.delta_e, r.eta_times_delta_e, r.closed_form_weight]);
    }
    t
}
