//! Linear-response route: the commutator response function
//! `phi(t) = -i Tr{rho [A, A(t)]}` in the energy basis, the dissipated
//! energy it implies in closed frequency form, and the same quantity from a
//! discretized time-domain friction-force convolution.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::drive::{check_decay, DriveSignal, TimeGrid, DECAY_TOL};
use crate::error::{Error, Result};
use crate::fockspace::{HermitianOperator, ProductBasis};
use crate::par::{map_range, map_slice, tree_sum};
use crate::result::{DissipationResult, Meta, Route};
use crate::table::Table;
use crate::thermal::ThermalEnsemble;

/// Bound on `|phi_pairs - phi_trace|` relative to `sum |c_k|`.
pub const TRACE_AGREEMENT_TOL: f64 = 1e-9;

/// Frequencies closer than this (relative) are merged into one sinusoid.
const MERGE_TOL: f64 = 1e-12;

/// Energy-basis form of the response function,
/// `phi(t) = -i sum_nm M_nm (exp(-i w_nm t) - exp(i w_nm t))` with
/// `M_nm = -(1/Z) exp(-beta (E_n + E_m) / 2) sinh(beta (E_n - E_m) / 2) |A_nm|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseFunction {
    m_matrix: DMatrix<f64>,
    energies: Vec<f64>,
    /// `(w_k > 0, c_k >= 0)` with `phi(t) = sum_k c_k sin(w_k t)`
    terms: Vec<(f64, f64)>,
    beta: f64,
    n_max: usize,
}

/// Builds `M_nm` from population differences, `M_nm = (P_n - P_m) |A_nm|^2 / 2`,
/// which equals the sinh form and stays finite at zero temperature.
pub fn response(
    a: &HermitianOperator,
    ensemble: &ThermalEnsemble,
    basis: &ProductBasis,
) -> Result<ResponseFunction> {
    let dim = basis.dim();
    a.ensure_dim(dim)?;
    if ensemble.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: ensemble.dim(),
        });
    }
    let p = ensemble.weights();
    let rows = map_range(dim, |n| {
        (0..dim)
            .map(|m| 0.5 * (p[n] - p[m]) * a.get(n, m).norm_sqr())
            .collect::<Vec<_>>()
    });
    let m_matrix = DMatrix::from_fn(dim, dim, |n, m| rows[n][m]);
    let energies = basis.energies().to_vec();

    let mut raw = Vec::new();
    for n in 0..dim {
        for m in (n + 1)..dim {
            let mnm = m_matrix[(n, m)];
            let w = energies[n] - energies[m];
            if mnm == 0.0 || w == 0.0 {
                continue;
            }
            // -4 M_nm sin(w t), oriented so w > 0
            if w > 0.0 {
                raw.push((w, -4.0 * mnm));
            } else {
                raw.push((-w, 4.0 * mnm));
            }
        }
    }
    raw.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut terms: Vec<(f64, f64)> = Vec::new();
    for (w, c) in raw {
        match terms.last_mut() {
            Some(last) if (w - last.0).abs() <= MERGE_TOL * w.max(1.0) => last.1 += c,
            _ => terms.push((w, c)),
        }
    }
    Ok(ResponseFunction {
        m_matrix,
        energies,
        terms,
        beta: ensemble.beta(),
        n_max: basis.n_max(),
    })
}

impl ResponseFunction {
    pub fn m_matrix(&self) -> &DMatrix<f64> {
        &self.m_matrix
    }

    /// `w_nm = E_n - E_m`
    pub fn omega(&self, n: usize, m: usize) -> f64 {
        self.energies[n] - self.energies[m]
    }

    /// Distinct positive frequencies and their sine amplitudes.
    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `phi(t)` from the merged sinusoids.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(w, c)| c * (w * t).sin()).sum()
    }

    /// `phi(t)` from the literal double sum; the imaginary part is rounding.
    pub fn evaluate_pairs(&self, t: f64) -> Complex64 {
        let dim = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 0..dim {
            for m in 0..dim {
                let mnm = self.m_matrix[(n, m)];
                if mnm == 0.0 {
                    continue;
                }
                let w = self.omega(n, m);
                acc += mnm * (Complex64::from_polar(1.0, -w * t) - Complex64::from_polar(1.0, w * t));
            }
        }
        acc * Complex64::new(0.0, -1.0)
    }

    /// `sum_k |c_k|`, the largest value `|phi|` can take.
    pub fn amplitude_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.1.abs()).sum()
    }

    /// Compares the energy-basis evaluator against brute-force
    /// `-i Tr{rho [A, A(t)]}` at `times`; returns the worst relative gap.
    pub fn verify_against_trace(
        &self,
        a: &HermitianOperator,
        ensemble: &ThermalEnsemble,
        basis: &ProductBasis,
        times: &[f64],
    ) -> Result<f64> {
        let scale = self.amplitude_scale().max(f64::MIN_POSITIVE);
        let gaps = map_slice(times, |&t| {
            let brute = trace_response(a, ensemble, basis, t);
            let pairs = self.evaluate_pairs(t);
            (brute - pairs).norm().max((brute.re - self.evaluate(t)).abs()) / scale
        });
        let worst = gaps.iter().fold(0.0_f64, |m, &g| m.max(g));
        if worst > TRACE_AGREEMENT_TOL {
            return Err(Error::Consistency {
                check: "response function vs trace",
                gap: worst,
                limit: TRACE_AGREEMENT_TOL,
            });
        }
        Ok(worst)
    }
}

/// `-i Tr{rho [A, A(t)]}` with `A(t) = exp(i H0 t) A exp(-i H0 t)`, by explicit
/// matrix products.
pub fn trace_response(
    a: &HermitianOperator,
    ensemble: &ThermalEnsemble,
    basis: &ProductBasis,
    t: f64,
) -> Complex64 {
    let dim = basis.dim();
    let e = basis.energies();
    let forward = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, e[i] * t)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let backward = forward.adjoint();
    let a = a.entries();
    let a_t = &forward * a * &backward;
    let comm = a * &a_t - &a_t * a;
    let rho = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(ensemble.weight(i), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    (rho * comm).trace() * Complex64::new(0.0, -1.0)
}

/// Closed frequency-domain dissipation,
/// `dE = -sum_nm M_nm w_nm q^(w_nm) q^(-w_nm)`.
pub fn delta_e_kubo_freq(resp: &ResponseFunction, signal: &DriveSignal) -> DissipationResult {
    let dim = resp.dim();
    let rows = map_range(dim, |n| {
        let (mut sum, mut scale) = (0.0, 0.0);
        for m in 0..dim {
            let mnm = resp.m_matrix[(n, m)];
            if mnm == 0.0 {
                continue;
            }
            let w = resp.omega(n, m);
            if w == 0.0 {
                continue;
            }
            let power = (signal.fourier(w) * signal.fourier(-w)).re;
            sum -= mnm * w * power;
            scale += (mnm * w * power).abs();
        }
        (sum, scale)
    });
    let delta_e = tree_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let scale = tree_sum(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let mut out = DissipationResult::new(delta_e, Route::KuboFreq, scale);
    out.meta = Meta {
        n_max: Some(resp.n_max),
        beta: Some(resp.beta),
        ..Meta::default()
    };
    out
}

/// How the causal convolution `F(t) = int_{t0}^t phi(t - s) q(s) ds` is
/// evaluated. Both give the same trapezoidal sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convolution {
    /// O(N^2) sum over precomputed lags.
    #[default]
    Direct,
    /// O(N K) phase recursion, one pass per distinct frequency.
    Recursive,
}

/// Friction force history on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionHistory {
    pub grid: TimeGrid,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub force: Vec<f64>,
}

impl FrictionHistory {
    /// Columns `t, q, v, F_f`.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&["t", "q", "v", "F_f"]);
        for i in 0..self.grid.len() {
            table.push_numeric(&[self.grid.time(i), self.q[i], self.v[i], self.force[i]]);
        }
        table
    }

    /// `-int v F dt`, trapezoidal.
    pub fn dissipated_energy(&self) -> f64 {
        -trapezoid(&self.v, &self.force, self.grid.dt())
    }
}

fn trapezoid(x: &[f64], y: &[f64], dt: f64) -> f64 {
    let n = x.len();
    let mut terms: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    terms[0] *= 0.5;
    terms[n - 1] *= 0.5;
    tree_sum(&terms) * dt
}

/// Centered differences inside, one-sided second order at both ends.
pub fn derivative(q: &[f64], dt: f64) -> Vec<f64> {
    let n = q.len();
    let mut v = vec![0.0; n];
    for i in 1..n - 1 {
        v[i] = (q[i + 1] - q[i - 1]) / (2.0 * dt);
    }
    v[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * dt);
    v[n - 1] = (3.0 * q[n - 1] - 4.0 * q[n - 2] + q[n - 3]) / (2.0 * dt);
    v
}

/// Trapezoidal causal convolution of `kernel` (a sum of sinusoids
/// `sum c_k sin(w_k t)`) with `q`.
fn convolve(terms: &[(f64, f64)], q: &[f64], dt: f64, method: Convolution) -> Vec<f64> {
    let n = q.len();
    match method {
        Convolution::Direct => {
            let lags: Vec<f64> = map_range(n, |k| {
                let t = k as f64 * dt;
                terms.iter().map(|&(w, c)| c * (w * t).sin()).sum()
            });
            map_range(n, |i| {
                if i == 0 {
                    return 0.0;
                }
                let mut acc = 0.0;
                for j in 0..=i {
                    acc += lags[i - j] * q[j];
                }
                acc -= 0.5 * (lags[i] * q[0] + lags[0] * q[i]);
                acc * dt
            })
        }
        Convolution::Recursive => {
            let per_term = map_slice(terms, |&(w, c)| {
                let z = Complex64::from_polar(1.0, w * dt);
                let mut g = Complex64::new(0.0, 0.0);
                let mut out = Vec::with_capacity(n);
                for (i, &qi) in q.iter().enumerate() {
                    g = g * z + qi;
                    if i == 0 {
                        out.push(0.0);
                        continue;
                    }
                    let head = Complex64::from_polar(0.5 * q[0], w * i as f64 * dt);
                    out.push(c * (g - head).im * dt);
                }
                out
            });
            let mut force = vec![0.0; n];
            for series in &per_term {
                for (f, s) in force.iter_mut().zip(series) {
                    *f += s;
                }
            }
            force
        }
    }
}

/// Friction force `F(t)` and velocity `v = dq/dt` on `grid`. Fails if the
/// sampled drive has not decayed at either edge.
pub fn friction_history(
    resp: &ResponseFunction,
    signal: &DriveSignal,
    grid: &TimeGrid,
    method: Convolution,
) -> Result<FrictionHistory> {
    if grid.len() < 3 {
        return Err(crate::error::invalid("grid", "need at least 3 samples"));
    }
    let q = signal.sample(grid);
    check_decay(&q, DECAY_TOL)?;
    let v = derivative(&q, grid.dt());
    let force = convolve(&resp.terms, &q, grid.dt(), method);
    Ok(FrictionHistory {
        grid: *grid,
        q,
        v,
        force,
    })
}

/// Time-domain dissipation `-int v(t) F(t) dt`. The result's metadata carries
/// the same quantity on the every-other-sample grid and the Richardson
/// estimate `|dE(dt) - dE(2 dt)| / 3` of the discretization error.
pub fn delta_e_kubo_time(
    resp: &ResponseFunction,
    signal: &DriveSignal,
    grid: &TimeGrid,
    method: Convolution,
) -> Result<DissipationResult> {
    let history = friction_history(resp, signal, grid, method)?;
    let delta_e = history.dissipated_energy();

    let coarse_len = (grid.len() + 1) / 2;
    let coarse_q: Vec<f64> = history.q.iter().step_by(2).copied().collect();
    let mut coarse_delta = f64::NAN;
    if coarse_len >= 3 {
        let dt2 = 2.0 * grid.dt();
        let v2 = derivative(&coarse_q, dt2);
        let f2 = convolve(&resp.terms, &coarse_q, dt2, method);
        coarse_delta = -trapezoid(&v2, &f2, dt2);
    }
    let scale = -trapezoid(
        &history.v.iter().map(|x| x.abs()).collect::<Vec<_>>(),
        &history.force.iter().map(|x| -x.abs()).collect::<Vec<_>>(),
        grid.dt(),
    );
    let mut out = DissipationResult::new(delta_e, Route::KuboTime, scale);
    out.meta = Meta {
        n_max: Some(resp.n_max),
        beta: Some(resp.beta),
        grid: Some(*grid),
        ..Meta::default()
    };
    Ok(out
        .with_diagnostic("coarse_delta_e", coarse_delta)
        .with_diagnostic("halving_error_estimate", (delta_e - coarse_delta).abs() / 3.0))
}

/// Numerical value of
/// `I = int int_{t > s} q'(t) q(s) (exp(-i w (t - s)) - exp(i w (t - s))) ds dt`
/// on `grid` (extrapolated over one halving), and its closed form `i w q^(w) q^(-w)`.
pub fn partial_integration_identity(
    signal: &DriveSignal,
    omega: f64,
    grid: &TimeGrid,
) -> Result<(Complex64, Complex64)> {
    let double_integral = |g: &TimeGrid| -> Result<f64> {
        let q = signal.sample(g);
        check_decay(&q, DECAY_TOL)?;
        let v = derivative(&q, g.dt());
        // exp(-iws) - exp(iws) = -2i sin(ws)
        let inner = convolve(&[(omega, 1.0)], &q, g.dt(), Convolution::Recursive);
        Ok(-2.0 * trapezoid(&v, &inner, g.dt()))
    };
    let coarse = double_integral(grid)?;
    let fine = double_integral(&grid.refined())?;
    // one Richardson step removes the O(dt^2) quadrature error
    let numeric = Complex64::new(0.0, (4.0 * fine - coarse) / 3.0);
    let closed = Complex64::new(0.0, omega) * signal.fourier(omega) * signal.fourier(-omega);
    Ok((numeric, closed))
}
