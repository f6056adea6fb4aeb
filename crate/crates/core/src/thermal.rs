//! Boltzmann populations over the truncated product basis.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fockspace::{Mode, ProductBasis};
use crate::par::tree_sum;

/// Canonical populations `P_n = exp(-beta E_n) / Z` on a truncated basis.
///
/// `beta = +inf` is the zero-temperature ground-state projector, split
/// evenly over a degenerate ground manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalEnsemble {
    beta: f64,
    weights: Vec<f64>,
    log_partition: f64,
}

/// Builds the ensemble with a ground-energy shift so `exp` never
/// overflows or fully underflows the leading weight.
pub fn make_ensemble(basis: &ProductBasis, beta: f64) -> Result<ThermalEnsemble> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(invalid("beta", format!("must be > 0 or +inf, got {beta}")));
    }
    let energies = basis.energies();
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);

    if beta.is_infinite() {
        let tol = 1e-12 * e0.abs().max(1.0);
        let ground: Vec<bool> = energies.iter().map(|&e| e - e0 <= tol).collect();
        let count = ground.iter().filter(|&&g| g).count() as f64;
        let weights = ground
            .iter()
            .map(|&g| if g { 1.0 / count } else { 0.0 })
            .collect();
        return Ok(ThermalEnsemble {
            beta,
            weights,
            log_partition: f64::NEG_INFINITY,
        });
    }

    let shifted: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let norm = tree_sum(&shifted);
    let weights = shifted.iter().map(|w| w / norm).collect();
    Ok(ThermalEnsemble {
        beta,
        weights,
        log_partition: -beta * e0 + norm.ln(),
    })
}

impl ThermalEnsemble {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    /// `ln Z`; `-inf` at zero temperature.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// Thermal average of `n_mode`.
pub fn mean_occupancy(ensemble: &ThermalEnsemble, basis: &ProductBasis, mode: Mode) -> f64 {
    let terms: Vec<f64> = ensemble
        .weights()
        .iter()
        .enumerate()
        .map(|(i, p)| p * basis.occupation(i, mode) as f64)
        .collect();
    tree_sum(&terms)
}

/// `<(n1 + 1) n2 + n1 (n2 + 1)>`, the squared exchange matrix elements
/// averaged over the ensemble. Only defined for equal mode frequencies.
pub fn pair_weight_factor(ensemble: &ThermalEnsemble, basis: &ProductBasis) -> Result<f64> {
    let (w1, w2) = (basis.omega(Mode::First), basis.omega(Mode::Second));
    if (w1 - w2).abs() > 1e-12 * w1.abs().max(w2.abs()) {
        return Err(invalid(
            "omega",
            format!("pair weight factor needs equal frequencies, got {w1} and {w2}"),
        ));
    }
    let terms: Vec<f64> = ensemble
        .weights()
        .iter()
        .zip(basis.states())
        .map(|(p, &(n1, n2))| {
            let (n1, n2) = (n1 as f64, n2 as f64);
            p * ((n1 + 1.0) * n2 + n1 * (n2 + 1.0))
        })
        .collect();
    Ok(tree_sum(&terms))
}

/// Untruncated Bose occupancy `x / (1 - x)` with `x = exp(-beta omega)`.
pub fn bose_occupancy(beta_omega: f64) -> f64 {
    if beta_omega.is_infinite() {
        return 0.0;
    }
    1.0 / beta_omega.exp_m1()
}

/// `1 / (2 sinh^2(beta omega / 2))`
pub fn pair_factor_closed_form(beta_omega: f64) -> f64 {
    if beta_omega.is_infinite() {
        return 0.0;
    }
    let s = (0.5 * beta_omega).sinh();
    0.5 / (s * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{build_basis, OscillatorSpec};
    use approx::assert_relative_eq;

    fn basis(w1: f64, w2: f64, n_max: usize) -> ProductBasis {
        build_basis(
            &OscillatorSpec::with_omega(w1).unwrap(),
            &OscillatorSpec::with_omega(w2).unwrap(),
            n_max,
        )
        .unwrap()
    }

    /// Truncated geometric-series mean, summed directly.
    fn geometric_mean_occupancy(x: f64, n_max: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for n in 0..=n_max {
            let w = x.powi(n as i32);
            num += n as f64 * w;
            den += w;
        }
        num / den
    }

    #[test]
    fn rejects_nonpositive_beta() {
        let b = basis(1.0, 1.0, 2);
        assert!(make_ensemble(&b, 0.0).is_err());
        assert!(make_ensemble(&b, -1.0).is_err());
        assert!(make_ensemble(&b, f64::NAN).is_err());
    }

    #[test]
    fn zero_temperature_is_ground_projector() {
        let b = basis(1.0, 2.0, 3);
        let e = make_ensemble(&b, f64::INFINITY).unwrap();
        assert_eq!(e.weight(b.index(0, 0).unwrap()), 1.0);
        assert_eq!(e.weights().iter().sum::<f64>(), 1.0);
        assert_eq!(mean_occupancy(&e, &b, Mode::First), 0.0);
        let b = basis(1.0, 1.0, 3);
        let e = make_ensemble(&b, f64::INFINITY).unwrap();
        assert_eq!(pair_weight_factor(&e, &b).unwrap(), 0.0);
    }

    #[test]
    fn weights_normalized_and_monotone() {
        let b = basis(1.0, 1.37, 8);
        for beta in [0.05, 0.7, 3.0, 800.0] {
            let e = make_ensemble(&b, beta).unwrap();
            assert!((e.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(e.weights().iter().all(|&p| p >= 0.0));
            let mut order: Vec<usize> = (0..b.dim()).collect();
            order.sort_by(|&i, &j| b.energy(i).total_cmp(&b.energy(j)));
            for w in order.windows(2) {
                assert!(e.weight(w[1]) <= e.weight(w[0]));
            }
        }
    }

    #[test]
    fn huge_beta_does_not_underflow() {
        let b = basis(1.0, 1.0, 4);
        let e = make_ensemble(&b, 5000.0).unwrap();
        assert_eq!(e.weight(0), 1.0);
        assert!(e.log_partition().is_finite());
    }

    #[test]
    fn log_partition_matches_direct_sum() {
        let b = basis(1.0, 1.5, 6);
        let beta = 0.8;
        let z: f64 = b.energies().iter().map(|en| (-beta * en).exp()).sum();
        let e = make_ensemble(&b, beta).unwrap();
        assert_relative_eq!(e.log_partition(), z.ln(), max_relative = 1e-13);
    }

    #[test]
    fn occupancy_at_ln2_is_one() {
        let b = basis(1.0, 1.0, 60);
        let e = make_ensemble(&b, std::f64::consts::LN_2).unwrap();
        let oracle = geometric_mean_occupancy(0.5, 60);
        assert!((oracle - 1.0).abs() < 1e-12);
        let n1 = mean_occupancy(&e, &b, Mode::First);
        assert!((n1 - 1.0).abs() < 1e-12, "{n1}");
    }

    #[test]
    fn occupancy_at_beta_one() {
        let b = basis(1.0, 1.0, 60);
        let e = make_ensemble(&b, 1.0).unwrap();
        let oracle = geometric_mean_occupancy((-1.0f64).exp(), 60);
        let closed = 1.0 / (std::f64::consts::E - 1.0);
        assert!((oracle - closed).abs() < 1e-12);
        assert!((mean_occupancy(&e, &b, Mode::Second) - closed).abs() < 1e-9);
        assert_relative_eq!(closed, 0.581_976_706_869_326_4, max_relative = 1e-12);
    }

    #[test]
    fn pair_factor_identity() {
        // 2(<n>+1)<n> at ln 2 is 4, and 1/(2 sinh^2(ln2 / 2)) is 4 too
        assert_relative_eq!(pair_factor_closed_form(std::f64::consts::LN_2), 4.0, max_relative = 1e-12);
        let b = basis(1.0, 1.0, 60);
        for beta in [std::f64::consts::LN_2, 0.5, 1.0, 2.0, 5.0] {
            let e = make_ensemble(&b, beta).unwrap();
            let direct = pair_weight_factor(&e, &b).unwrap();
            let n = mean_occupancy(&e, &b, Mode::First);
            assert!((direct - 2.0 * (n + 1.0) * n).abs() < 1e-9);
            assert!((direct - pair_factor_closed_form(beta)).abs() < 1e-9, "beta {beta}");
        }
    }

    #[test]
    fn pair_factor_rejects_detuned() {
        let b = basis(1.0, 1.1, 4);
        let e = make_ensemble(&b, 1.0).unwrap();
        assert!(pair_weight_factor(&e, &b).is_err());
    }

    #[test]
    fn occupancy_decreases_with_beta() {
        let b = basis(1.0, 1.0, 40);
        let ns: Vec<f64> = [0.3, 0.6, 1.0, 2.0, 4.0]
            .iter()
            .map(|&beta| mean_occupancy(&make_ensemble(&b, beta).unwrap(), &b, Mode::First))
            .collect();
        assert!(ns.windows(2).all(|w| w[1] < w[0]));
    }
}
