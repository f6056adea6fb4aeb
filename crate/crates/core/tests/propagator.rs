use cfl_core::drive::DriveSignal;
use cfl_core::fockspace::{build_basis, full_coupling, rwa_coupling, OscillatorSpec};
use cfl_core::propagator::{counter_rotating_audit, delta_e_propagated, AuditConfig, PropagationRun};
use cfl_core::spectral;
use cfl_core::thermal::make_ensemble;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_second_order_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac1e);
    for trial in 0..10 {
        let w2 = rng.random_range(0.6..1.6);
        let n_max = rng.random_range(3..=5);
        let beta = rng.random_range(0.5..3.0);
        let tau = rng.random_range(1.0..4.0);
        let full = rng.random_bool(0.5);
        let b = build_basis(&OscillatorSpec::with_omega(1.0).unwrap(), &OscillatorSpec::with_omega(w2).unwrap(), n_max).unwrap();
        let a = if full { full_coupling(&b) } else { rwa_coupling(&b) };
        let e = make_ensemble(&b, beta).unwrap();
        let s = DriveSignal::gaussian_pulse(1e-3, tau).unwrap();
        let run = PropagationRun::covering(&s, 0.05).unwrap();
        let exact = delta_e_propagated(&e, &a, &s, &b, &run).unwrap();
        let predicted = spectral::delta_e(&a, &s, &e, &b).unwrap().delta_e;
        let ratio = exact.result.delta_e / predicted;
        assert!((ratio - 1.0).abs() < 0.02, "trial {trial}: ratio {ratio}");
        assert!(exact.norm_drift < 1e-8);
    }
}

#[test]
fn second_order_scaling_when_perturbative() {
    let b = build_basis(&OscillatorSpec::with_omega(1.0).unwrap(), &OscillatorSpec::with_omega(1.4).unwrap(), 4).unwrap();
    let a = full_coupling(&b);
    let e = make_ensemble(&b, 1.0).unwrap();
    let de = |g: f64| {
        let s = DriveSignal::gaussian_pulse(g, 2.0).unwrap();
        let run = PropagationRun::covering(&s, 0.05).unwrap();
        delta_e_propagated(&e, &a, &s, &b, &run).unwrap().result.delta_e
    };
    let slope = (de(1e-2) / de(1e-4)).ln() / 100f64.ln();
    assert!((slope - 2.0).abs() < 0.01, "slope {slope}");
}

#[test]
fn counter_rotating_gap_shrinks_with_eta() {
    let cfg = AuditConfig {
        omega1: 1.0,
        omega2: 1.1,
        beta: 1.0,
        gamma: 1e-4,
        n_max: 6,
        dt: 0.1,
    };
    let rows = counter_rotating_audit(&cfg, &[0.5, 0.01]).unwrap();
    assert!(rows.iter().all(|r| r.leakage_ok), "{rows:?}");
    assert!(rows[0].rel_gap > 0.0);
    assert!(rows[1].rel_gap < rows[0].rel_gap, "{rows:?}");
}

#[test]
fn zero_temperature_rwa_is_silent_but_full_coupling_excites() {
    let cfg = AuditConfig {
        omega1: 1.0,
        omega2: 1.0,
        beta: f64::INFINITY,
        gamma: 0.05,
        n_max: 4,
        dt: 0.1,
    };
    let rows = counter_rotating_audit(&cfg, &[0.5]).unwrap();
    assert_eq!(rows[0].delta_e_rwa, 0.0);
    assert!(rows[0].delta_e_full > 0.0);
}
