//! Classical drive `q(t)` and its Fourier transform
//! `q^(w) = int q(t) exp(-i w t) dt`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fockspace::OscillatorSpec;

/// Edge decay required of any sampled signal, relative to its peak.
pub const DECAY_TOL: f64 = 1e-10;

/// Uniform time grid `t_i = start + i dt`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    start: f64,
    dt: f64,
    len: usize,
}

impl TimeGrid {
    /// Grid from `start` to (at least) `end` with spacing `dt`.
    pub fn new(start: f64, end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
        }
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(invalid("horizon", format!("need start < end, got [{start}, {end}]")));
        }
        let steps = ((end - start) / dt - 1e-9).ceil().max(2.0) as usize;
        Ok(Self {
            start,
            dt,
            len: steps + 1,
        })
    }

    /// Smallest grid with spacing `dt` over which `signal` rises above
    /// `rel_tol` of its peak.
    pub fn covering(signal: &DriveSignal, dt: f64, rel_tol: f64) -> Result<Self> {
        let (a, b) = signal.support(rel_tol);
        Self::new(a, b, dt)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.time(i))
    }

    /// Same span, spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            start: self.start,
            dt: 0.5 * self.dt,
            len: 2 * self.len - 1,
        }
    }
}

/// Uniformly sampled real signal, zero outside its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Tabulated {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The classical time dependence multiplying the coupling operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveSignal {
    /// `gamma t exp(-eta t)` for `t > 0`, zero before.
    RampExp { gamma: f64, eta: f64 },
    /// `gamma exp(-((t - center) / tau)^2)`
    GaussianPulse { gamma: f64, tau: f64, center: f64 },
    Tabulated(Tabulated),
    /// Sum of the component drives.
    Superposition(Vec<DriveSignal>),
}

fn finite(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(name, format!("must be finite, got {x}")))
    }
}

fn positive(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {x}")))
    }
}

/// Checks both ends of `values` against [`DECAY_TOL`]-style `limit`.
pub fn check_decay(values: &[f64], limit: f64) -> Result<()> {
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(());
    }
    let first = values.first().map_or(0.0, |v| v.abs()) / peak;
    let last = values.last().map_or(0.0, |v| v.abs()) / peak;
    if first > limit {
        return Err(Error::GridTooShort {
            edge: "start",
            ratio: first,
            limit,
        });
    }
    if last > limit {
        return Err(Error::GridTooShort {
            edge: "end",
            ratio: last,
            limit,
        });
    }
    Ok(())
}

impl DriveSignal {
    pub fn ramp_exp(gamma: f64, eta: f64) -> Result<Self> {
        Ok(DriveSignal::RampExp {
            gamma: finite("gamma", gamma)?,
            eta: positive("eta", eta)?,
        })
    }

    pub fn gaussian_pulse(gamma: f64, tau: f64) -> Result<Self> {
        Self::gaussian_pulse_at(gamma, tau, 0.0)
    }

    pub fn gaussian_pulse_at(gamma: f64, tau: f64, center: f64) -> Result<Self> {
        Ok(DriveSignal::GaussianPulse {
            gamma: finite("gamma", gamma)?,
            tau: positive("tau", tau)?,
            center: finite("center", center)?,
        })
    }

    pub fn superposition(parts: Vec<DriveSignal>) -> Result<Self> {
        if parts.is_empty() {
            return Err(invalid("superposition", "needs at least one component"));
        }
        Ok(DriveSignal::Superposition(parts))
    }

    /// Samples on a uniform grid; both ends must have decayed below
    /// [`DECAY_TOL`] of the peak.
    pub fn tabulated(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if grid.len() < 4 {
            return Err(invalid("grid", "tabulated signals need at least 4 samples"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite sample {bad}")));
        }
        check_decay(&values, DECAY_TOL)?;
        Ok(DriveSignal::Tabulated(Tabulated { grid, values }))
    }

    /// Samples `self` on `grid` into a tabulated signal.
    pub fn tabulate(&self, grid: TimeGrid) -> Result<Self> {
        Self::tabulated(grid, self.sample(&grid))
    }

    /// Same drive with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            DriveSignal::RampExp { gamma, eta } => DriveSignal::RampExp {
                gamma: gamma * factor,
                eta: *eta,
            },
            DriveSignal::GaussianPulse { gamma, tau, center } => DriveSignal::GaussianPulse {
                gamma: gamma * factor,
                tau: *tau,
                center: *center,
            },
            DriveSignal::Tabulated(t) => DriveSignal::Tabulated(Tabulated {
                grid: t.grid,
                values: t.values.iter().map(|v| v * factor).collect(),
            }),
            DriveSignal::Superposition(parts) => {
                DriveSignal::Superposition(parts.iter().map(|p| p.scaled(factor)).collect())
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            DriveSignal::RampExp { gamma, eta } => {
                if t > 0.0 {
                    gamma * t * (-eta * t).exp()
                } else {
                    0.0
                }
            }
            DriveSignal::GaussianPulse { gamma, tau, center } => {
                let x = (t - center) / tau;
                gamma * (-x * x).exp()
            }
            DriveSignal::Tabulated(tab) => {
                let g = &tab.grid;
                let s = (t - g.start) / g.dt;
                if !(0.0..=(g.len - 1) as f64).contains(&s) {
                    return 0.0;
                }
                let i = (s.floor() as usize).min(g.len - 2);
                let frac = s - i as f64;
                tab.values[i] * (1.0 - frac) + tab.values[i + 1] * frac
            }
            DriveSignal::Superposition(parts) => parts.iter().map(|p| p.value(t)).sum(),
        }
    }

    pub fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.times().map(|t| self.value(t)).collect()
    }

    /// `q^(omega)`: closed forms for the analytic kinds, end-corrected
    /// trapezoidal quadrature for tabulated samples.
    pub fn fourier(&self, omega: f64) -> Complex64 {
        match self {
            DriveSignal::RampExp { gamma, eta } => {
                let s = Complex64::new(*eta, omega);
                Complex64::new(*gamma, 0.0) / (s * s)
            }
            DriveSignal::GaussianPulse { gamma, tau, center } => {
                let mag = gamma * tau * PI.sqrt() * (-0.25 * omega * omega * tau * tau).exp();
                Complex64::from_polar(mag, -omega * center)
            }
            DriveSignal::Tabulated(tab) => tabulated_fourier(tab, omega),
            DriveSignal::Superposition(parts) => parts.iter().map(|p| p.fourier(omega)).sum(),
        }
    }

    /// `q^(omega) q^(-omega)`, real and non-negative for a real signal.
    pub fn power_kernel(&self, omega: f64) -> f64 {
        match self {
            DriveSignal::RampExp { gamma, eta } => {
                let d = eta * eta + omega * omega;
                gamma * gamma / (d * d)
            }
            _ => (self.fourier(omega) * self.fourier(-omega)).re,
        }
    }

    /// Peak `|q(t)|` (for superpositions, the sum of component peaks bounds it).
    pub fn peak(&self) -> f64 {
        match self {
            DriveSignal::RampExp { gamma, eta } => gamma.abs() / (std::f64::consts::E * eta),
            DriveSignal::GaussianPulse { gamma, .. } => gamma.abs(),
            DriveSignal::Tabulated(t) => t.values.iter().fold(0.0, |m, v| m.max(v.abs())),
            DriveSignal::Superposition(parts) => parts.iter().map(|p| p.peak()).sum(),
        }
    }

    /// Interval outside which `|q| < rel_tol * peak`.
    pub fn support(&self, rel_tol: f64) -> (f64, f64) {
        let rel_tol = rel_tol.clamp(1e-300, 0.5);
        match self {
            DriveSignal::RampExp { eta, .. } => {
                // x exp(1 - x) = rel_tol with x = eta t > 1
                let target = rel_tol.ln() - 1.0;
                let mut x = 1.0 - target;
                for _ in 0..60 {
                    let f = x.ln() - x - target;
                    let step = f / (1.0 / x - 1.0);
                    x -= step;
                    if step.abs() < 1e-14 * x {
                        break;
                    }
                }
                (0.0, x / eta)
            }
            DriveSignal::GaussianPulse { tau, center, .. } => {
                let half = tau * (-rel_tol.ln()).sqrt();
                (center - half, center + half)
            }
            DriveSignal::Tabulated(t) => (t.grid.start, t.grid.end()),
            DriveSignal::Superposition(parts) => {
                let total = self.peak();
                parts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                    let local = (rel_tol * total / p.peak().max(f64::MIN_POSITIVE)).min(0.5);
                    let (pa, pb) = p.support(local);
                    (a.min(pa), b.max(pb))
                })
            }
        }
    }
}

fn tabulated_fourier(tab: &Tabulated, omega: f64) -> Complex64 {
    let g = &tab.grid;
    let h = g.dt;
    let n = tab.values.len();
    let f = |i: usize| Complex64::from_polar(tab.values[i], -omega * g.time(i));
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 1..n - 1 {
        sum += f(i);
    }
    let trapezoid = (sum + 0.5 * (f(0) + f(n - 1))) * h;
    // Euler-Maclaurin h^2/12 term with third-order one-sided derivatives
    let d_start = -11.0 * f(0) + 18.0 * f(1) - 9.0 * f(2) + 2.0 * f(3);
    let d_end = 11.0 * f(n - 1) - 18.0 * f(n - 2) + 9.0 * f(n - 3) - 2.0 * f(n - 4);
    trapezoid - (d_end - d_start) * (h / 72.0)
}

/// Drive amplitude for the position-position coupling of two modes moving
/// with `v . grad psi`: `gamma = (D / 2)^(1/2) v . grad psi`,
/// `D = 1 / (2 m1 m2 omega1 omega2)` (hbar = 1).
pub fn gamma_from_physics(v_dot_grad_psi: f64, spec1: &OscillatorSpec, spec2: &OscillatorSpec) -> f64 {
    let d = 1.0 / (2.0 * spec1.mass() * spec2.mass() * spec1.omega() * spec2.omega());
    (0.5 * d).sqrt() * v_dot_grad_psi
}

/// Reads two whitespace-separated columns `(time, value)`; `#` starts a
/// comment. Times must be uniformly spaced.
pub fn parse_tabulated(text: &str) -> Result<DriveSignal> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno + 1,
                reason: format!("{s:?}: {e}"),
            })
        };
        times.push(parse(cols[0])?);
        values.push(parse(cols[1])?);
    }
    if times.len() < 4 {
        return Err(Error::Parse {
            line: 0,
            reason: "need at least 4 samples".into(),
        });
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Parse {
            line: 0,
            reason: "times must increase".into(),
        });
    }
    for (i, &t) in times.iter().enumerate() {
        let expect = times[0] + i as f64 * dt;
        if (t - expect).abs() > 1e-9 * dt.max(t.abs()) {
            return Err(Error::Parse {
                line: i + 1,
                reason: format!("non-uniform spacing at t = {t}"),
            });
        }
    }
    let grid = TimeGrid {
        start: times[0],
        dt,
        len: times.len(),
    };
    DriveSignal::tabulated(grid, values)
}

pub fn read_tabulated(path: impl AsRef<Path>) -> Result<DriveSignal> {
    parse_tabulated(&std::fs::read_to_string(path)?)
}
