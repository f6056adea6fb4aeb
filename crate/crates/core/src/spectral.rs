//! First-order transition amplitudes and the second-order energy change
//! they imply for an initially thermal state.
//!
//! With `b_nm = i A_nm q^(-w_nm)` and `B_nm = |b_nm|^2` (hbar = 1),
//!
//! ```text
//! dE = 1/2 sum_nm (E_n - E_m)(P_m - P_n) B_nm
//! ```
//!
//! which is also evaluated in the unsymmetrized form
//! `sum_nm (E_n - E_m) P_m B_nm` as a consistency check.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::drive::DriveSignal;
use crate::error::{Error, Result};
use crate::fockspace::{HermitianOperator, ProductBasis};
use crate::par::{map_range, tree_sum};
use crate::result::{DissipationResult, Meta, Route};
use crate::thermal::ThermalEnsemble;

/// Allowed gap between the two algebraic forms, relative to the term scale.
pub const FORM_AGREEMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    amplitudes: DMatrix<Complex64>,
    probabilities: DMatrix<f64>,
}

impl TransitionKernel {
    /// `b_nm`
    pub fn amplitudes(&self) -> &DMatrix<Complex64> {
        &self.amplitudes
    }

    /// `B_nm = |b_nm|^2`
    pub fn probabilities(&self) -> &DMatrix<f64> {
        &self.probabilities
    }

    pub fn dim(&self) -> usize {
        self.probabilities.nrows()
    }
}

/// First-order amplitudes after the drive has switched off.
pub fn amplitudes(
    a: &HermitianOperator,
    signal: &DriveSignal,
    basis: &ProductBasis,
) -> Result<TransitionKernel> {
    a.ensure_dim(basis.dim())?;
    let dim = basis.dim();
    let energies = basis.energies();
    let rows = map_range(dim, |n| {
        (0..dim)
            .map(|m| {
                let a_nm = a.get(n, m);
                if a_nm.re == 0.0 && a_nm.im == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let w_nm = energies[n] - energies[m];
                Complex64::i() * a_nm * signal.fourier(-w_nm)
            })
            .collect::<Vec<_>>()
    });
    let amplitudes = DMatrix::from_fn(dim, dim, |n, m| rows[n][m]);
    let probabilities = amplitudes.map(|b| b.norm_sqr());
    Ok(TransitionKernel {
        amplitudes,
        probabilities,
    })
}

struct RowSums {
    symmetric: f64,
    upward: f64,
    scale: f64,
}

fn reduce<F>(dim: usize, energies: &[f64], weights: &[f64], prob: F) -> Result<(f64, f64, f64)>
where
    F: Fn(usize, usize) -> f64 + Sync + Send,
{
    let rows = map_range(dim, |n| {
        let mut acc = RowSums {
            symmetric: 0.0,
            upward: 0.0,
            scale: 0.0,
        };
        for m in 0..dim {
            let delta = energies[n] - energies[m];
            // degenerate pairs carry no energy
            if delta == 0.0 {
                continue;
            }
            let b = prob(n, m);
            if b == 0.0 {
                continue;
            }
            acc.symmetric += 0.5 * delta * (weights[m] - weights[n]) * b;
            acc.upward += delta * weights[m] * b;
            acc.scale += delta.abs() * weights[m] * b;
        }
        acc
    });
    let symmetric = tree_sum(&rows.iter().map(|r| r.symmetric).collect::<Vec<_>>());
    let upward = tree_sum(&rows.iter().map(|r| r.upward).collect::<Vec<_>>());
    let scale = tree_sum(&rows.iter().map(|r| r.scale).collect::<Vec<_>>());
    let gap = (symmetric - upward).abs();
    if gap > FORM_AGREEMENT_TOL * scale {
        return Err(Error::Consistency {
            check: "symmetrized vs unsymmetrized energy sum",
            gap,
            limit: FORM_AGREEMENT_TOL * scale,
        });
    }
    Ok((symmetric, upward, scale))
}

fn finish(symmetric: f64, upward: f64, scale: f64, ensemble: &ThermalEnsemble, basis: &ProductBasis) -> DissipationResult {
    let mut out = DissipationResult::new(symmetric, Route::Spectral, scale);
    out.meta = Meta {
        n_max: Some(basis.n_max()),
        beta: Some(ensemble.beta()),
        ..Meta::default()
    };
    out.with_diagnostic("unsymmetrized_delta_e", upward)
        .with_diagnostic("form_gap", (symmetric - upward).abs())
}

/// Energy change from a precomputed transition kernel.
pub fn delta_e_spectral(
    kernel: &TransitionKernel,
    ensemble: &ThermalEnsemble,
    basis: &ProductBasis,
) -> Result<DissipationResult> {
    let dim = basis.dim();
    if kernel.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: kernel.dim(),
        });
    }
    if ensemble.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: ensemble.dim(),
        });
    }
    let probs = kernel.probabilities();
    let (s, u, scale) = reduce(dim, basis.energies(), ensemble.weights(), |n, m| probs[(n, m)])?;
    Ok(finish(s, u, scale, ensemble, basis))
}

/// Same value as [`amplitudes`] followed by [`delta_e_spectral`], without
/// materializing the kernel. Used by sweeps over large bases.
pub fn delta_e(
    a: &HermitianOperator,
    signal: &DriveSignal,
    ensemble: &ThermalEnsemble,
    basis: &ProductBasis,
) -> Result<DissipationResult> {
    let dim = basis.dim();
    a.ensure_dim(dim)?;
    if ensemble.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: ensemble.dim(),
        });
    }
    let energies = basis.energies();
    let (s, u, scale) = reduce(dim, energies, ensemble.weights(), |n, m| {
        let a_nm = a.get(n, m);
        if a_nm.re == 0.0 && a_nm.im == 0.0 {
            return 0.0;
        }
        let b = Complex64::i() * a_nm * signal.fourier(-(energies[n] - energies[m]));
        b.norm_sqr()
    })?;
    Ok(finish(s, u, scale, ensemble, basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{build_basis, full_coupling, rwa_coupling, OscillatorSpec};
    use crate::thermal::make_ensemble;
    use approx::assert_relative_eq;

    fn basis(w1: f64, w2: f64, n_max: usize) -> ProductBasis {
        build_basis(
            &OscillatorSpec::with_omega(w1).unwrap(),
            &OscillatorSpec::with_omega(w2).unwrap(),
            n_max,
        )
        .unwrap()
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let b = basis(1.0, 1.3, 4);
        let a = HermitianOperator::zeros(b.dim());
        let s = DriveSignal::ramp_exp(1.0, 0.1).unwrap();
        let k = amplitudes(&a, &s, &b).unwrap();
        assert!(k.amplitudes().iter().all(|z| z.norm() == 0.0));
        let e = make_ensemble(&b, 1.0).unwrap();
        assert_eq!(delta_e_spectral(&k, &e, &b).unwrap().delta_e, 0.0);
    }

    #[test]
    fn resonant_exchange_probability() {
        let b = basis(1.0, 1.0, 2);
        let a = rwa_coupling(&b);
        let s = DriveSignal::ramp_exp(1.0, 0.1).unwrap();
        let k = amplitudes(&a, &s, &b).unwrap();
        let (i, j) = (b.index(0, 1).unwrap(), b.index(1, 0).unwrap());
        assert_relative_eq!(k.probabilities()[(i, j)], 1e4, max_relative = 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_and_nonnegative() {
        let b = basis(1.0, 1.37, 4);
        let a = full_coupling(&b);
        let s = DriveSignal::superposition(vec![
            DriveSignal::gaussian_pulse_at(0.3, 1.5, -2.0).unwrap(),
            DriveSignal::ramp_exp(0.2, 0.5).unwrap(),
        ])
        .unwrap();
        let k = amplitudes(&a, &s, &b).unwrap();
        let p = k.probabilities();
        for n in 0..b.dim() {
            for m in 0..b.dim() {
                assert!(p[(n, m)] >= 0.0);
                assert!((p[(n, m)] - p[(m, n)]).abs() <= 1e-12 * p[(n, m)].max(1e-300));
            }
        }
    }

    #[test]
    fn zero_temperature_rwa_is_exactly_zero() {
        let b = basis(1.0, 1.2, 6);
        let a = rwa_coupling(&b);
        let s = DriveSignal::ramp_exp(1.0, 0.05).unwrap();
        let e = make_ensemble(&b, f64::INFINITY).unwrap();
        let r = delta_e(&a, &s, &e, &b).unwrap();
        assert_eq!(r.delta_e, 0.0);
    }

    #[test]
    fn fused_matches_two_step() {
        let b = basis(1.0, 0.9, 5);
        let a = full_coupling(&b);
        let s = DriveSignal::gaussian_pulse(0.4, 2.0).unwrap();
        let e = make_ensemble(&b, 0.7).unwrap();
        let two = delta_e_spectral(&amplitudes(&a, &s, &b).unwrap(), &e, &b).unwrap();
        let one = delta_e(&a, &s, &e, &b).unwrap();
        assert_eq!(two.delta_e, one.delta_e);
    }

    #[test]
    fn quadratic_in_gamma() {
        let b = basis(1.0, 1.1, 6);
        let a = rwa_coupling(&b);
        let e = make_ensemble(&b, 1.0).unwrap();
        let s1 = DriveSignal::ramp_exp(0.3, 0.2).unwrap();
        let d1 = delta_e(&a, &s1, &e, &b).unwrap().delta_e;
        let d2 = delta_e(&a, &s1.scaled(2.0), &e, &b).unwrap().delta_e;
        assert_relative_eq!(d2, 4.0 * d1, max_relative = 1e-12);
    }

    #[test]
    fn detuned_rwa_matches_occupation_difference() {
        // Untruncated closed form: dE = K(d) d (n(beta w2) - n(beta w1)),
        // d = w1 - w2, K = |q^(d)|^2. Tails at n_max = 40 are < 1e-15.
        let (w1, w2, beta, g, eta) = (1.0, 0.93, 1.3, 0.2, 0.05);
        let b = basis(w1, w2, 40);
        let a = rwa_coupling(&b);
        let e = make_ensemble(&b, beta).unwrap();
        let s = DriveSignal::ramp_exp(g, eta).unwrap();
        let nbar = |x: f64| 1.0 / x.exp_m1();
        let d = w1 - w2;
        let oracle = g * g / (eta * eta + d * d).powi(2) * d * (nbar(beta * w2) - nbar(beta * w1));
        let got = delta_e(&a, &s, &e, &b).unwrap().delta_e;
        assert_relative_eq!(got, oracle, max_relative = 1e-12);
    }
}
