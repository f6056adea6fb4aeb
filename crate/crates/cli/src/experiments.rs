//! Experiment runners. Each returns a result table plus scalar diagnostics
//! for the metadata sidecar.

use std::collections::BTreeMap;

use cfl_core::drive::{read_tabulated, DriveSignal, TimeGrid, DECAY_TOL};
use cfl_core::fockspace::{build_basis, full_coupling, rwa_coupling, HermitianOperator, OscillatorSpec, ProductBasis};
use cfl_core::kubo;
use cfl_core::par::map_slice;
use cfl_core::propagator::{audit_table, counter_rotating_audit, delta_e_propagated, AuditConfig, PropagationRun};
use cfl_core::resonance::{self, required_n_max, DetuningSweep, ResonanceConfig, TAIL_TOL};
use cfl_core::result::relative_gap;
use cfl_core::spectral;
use cfl_core::table::{Cell, Table};
use cfl_core::thermal::make_ensemble;

use crate::config::{Coupling, DriveKind, Experiment, ExperimentConfig, RouteName};
use crate::error::{CliError, CliResult};

/// Largest truncation chosen automatically; larger needs an explicit `n_max`.
pub const AUTO_N_MAX_LIMIT: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    pub diagnostics: BTreeMap<String, f64>,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    let mut diagnostics = BTreeMap::new();
    let table = match cfg.experiment {
        Experiment::Compare => compare(cfg, &mut diagnostics)?,
        Experiment::SweepTemperature => sweep_temperature(cfg, &mut diagnostics)?,
        Experiment::SweepDetuning => sweep_detuning(cfg, &mut diagnostics)?,
        Experiment::SweepEta => sweep_eta(cfg, &mut diagnostics)?,
        Experiment::Propagate => propagate(cfg, &mut diagnostics)?,
        Experiment::AuditCounterRotating => audit(cfg, &mut diagnostics)?,
    };
    let table = table.with_provenance(format!(
        "cfl {} experiment={}",
        env!("CARGO_PKG_VERSION"),
        cfg.experiment.name()
    ));
    Ok(RunOutput { table, diagnostics })
}

fn resolve_n_max(cfg: &ExperimentConfig, beta: f64) -> CliResult<usize> {
    if let Some(n) = cfg.n_max {
        return Ok(n);
    }
    let n = required_n_max(beta, cfg.omega1.min(cfg.omega2), TAIL_TOL);
    if n > AUTO_N_MAX_LIMIT {
        return Err(CliError::Convergence(format!(
            "beta = {beta} needs n_max = {n} for a thermal tail below {TAIL_TOL:e}; set n_max explicitly"
        )));
    }
    Ok(n)
}

fn tail(beta: f64, omega: f64, n_max: usize) -> f64 {
    if beta.is_infinite() {
        0.0
    } else {
        (-beta * omega * (n_max + 1) as f64).exp()
    }
}

fn signal(cfg: &ExperimentConfig) -> CliResult<DriveSignal> {
    Ok(match cfg.drive {
        DriveKind::RampExp => DriveSignal::ramp_exp(cfg.gamma, cfg.eta)?,
        DriveKind::Gaussian => DriveSignal::gaussian_pulse_at(cfg.gamma, cfg.tau, cfg.center)?,
        DriveKind::Tabulated => {
            let path = cfg.drive_file.as_ref().expect("validated");
            read_tabulated(path)
                .map_err(|e| match e {
                    cfl_core::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
                    other => CliError::from(other),
                })?
                .scaled(cfg.gamma)
        }
    })
}

fn setup(cfg: &ExperimentConfig, n_max: usize) -> CliResult<(ProductBasis, HermitianOperator)> {
    let basis = build_basis(
        &OscillatorSpec::with_omega(cfg.omega1)?,
        &OscillatorSpec::with_omega(cfg.omega2)?,
        n_max,
    )?;
    let a = match cfg.coupling {
        Coupling::Rwa => rwa_coupling(&basis),
        Coupling::Full => full_coupling(&basis),
    };
    Ok((basis, a))
}

fn time_grid(cfg: &ExperimentConfig, s: &DriveSignal) -> CliResult<TimeGrid> {
    Ok(match cfg.horizon {
        Some((a, b)) => TimeGrid::new(a, b, cfg.dt)?,
        None => TimeGrid::covering(s, cfg.dt, 0.5 * DECAY_TOL)?,
    })
}

fn run_window(cfg: &ExperimentConfig, s: &DriveSignal) -> CliResult<PropagationRun> {
    Ok(match cfg.horizon {
        Some((a, b)) => PropagationRun::new(a, b, cfg.dt)?,
        None => PropagationRun::covering(s, cfg.dt)?,
    })
}

fn compare(cfg: &ExperimentConfig, diag: &mut BTreeMap<String, f64>) -> CliResult<Table> {
    let n_max = resolve_n_max(cfg, cfg.beta)?;
    let (basis, a) = setup(cfg, n_max)?;
    let ensemble = make_ensemble(&basis, cfg.beta)?;
    let s = signal(cfg)?;
    diag.insert("n_max".into(), n_max as f64);
    diag.insert("dim".into(), basis.dim() as f64);
    diag.insert("truncation_tail".into(), tail(cfg.beta, cfg.omega1.min(cfg.omega2), n_max));

    let spec = spectral::delta_e(&a, &s, &ensemble, &basis)?;
    if let Some(g) = spec.meta.diagnostic("form_gap") {
        diag.insert("spectral_form_gap".into(), g);
    }
    let mut values: Vec<(RouteName, f64)> = Vec::new();
    let mut response = None;
    for &route in &cfg.routes {
        let value = match route {
            RouteName::Spectral => spec.delta_e,
            RouteName::KuboFreq | RouteName::KuboTime => {
                let r = match &response {
                    Some(r) => r,
                    None => response.insert(kubo::response(&a, &ensemble, &basis)?),
                };
                if route == RouteName::KuboFreq {
                    kubo::delta_e_kubo_freq(r, &s).delta_e
                } else {
                    let grid = time_grid(cfg, &s)?;
                    let res = kubo::delta_e_kubo_time(r, &s, &grid, cfg.convolution)?;
                    if let Some(e) = res.meta.diagnostic("halving_error_estimate") {
                        diag.insert("kubo_time_halving_error".into(), e);
                    }
                    diag.insert("kubo_time_samples".into(), grid.len() as f64);
                    res.delta_e
                }
            }
            RouteName::ClosedForm => {
                if cfg.coupling != Coupling::Rwa || cfg.drive != DriveKind::RampExp {
                    return Err(CliError::Config(
                        "closed_form needs coupling = rwa and drive = ramp_exp".into(),
                    ));
                }
                let c = ResonanceConfig::new(cfg.omega1, cfg.omega2, cfg.beta, cfg.gamma, cfg.eta)?;
                let res = resonance::delta_e_closed_form(&c);
                if let Some(w) = res.meta.diagnostic("weight") {
                    diag.insert("closed_form_weight".into(), w);
                }
                res.delta_e
            }
            RouteName::Propagator => {
                let run = run_window(cfg, &s)?;
                let rep = delta_e_propagated(&ensemble, &a, &s, &basis, &run)?;
                diag.insert("propagator_norm_drift".into(), rep.norm_drift);
                diag.insert("propagator_leakage".into(), rep.leakage);
                diag.insert("propagator_leakage_ok".into(), f64::from(u8::from(rep.leakage_ok)));
                rep.result.delta_e
            }
        };
        values.push((route, value));
    }
    let mut t = Table::new(&["route", "delta_e", "rel_gap_vs_spectral"]);
    for (route, v) in values {
        let gap = relative_gap(v, spec.delta_e, 0.0);
        diag.insert(format!("rel_gap_{}", route.name()), gap);
        t.push(vec![Cell::from(route.name()), v.into(), gap.into()]);
    }
    Ok(t)
}

fn sweep_temperature(cfg: &ExperimentConfig, diag: &mut BTreeMap<String, f64>) -> CliResult<Table> {
    let betas: Vec<f64> = cfg
        .temperatures
        .iter()
        .map(|&t| if t == 0.0 { f64::INFINITY } else { 1.0 / t })
        .collect();
    let hottest = betas.iter().copied().fold(f64::INFINITY, f64::min);
    let n_max = resolve_n_max(cfg, hottest)?;
    let (basis, a) = setup(cfg, n_max)?;
    let s = signal(cfg)?;
    diag.insert("n_max".into(), n_max as f64);
    diag.insert("truncation_tail".into(), tail(hottest, cfg.omega1.min(cfg.omega2), n_max));
    let rows = map_slice(&betas, |&beta| -> CliResult<(f64, f64)> {
        let e = make_ensemble(&basis, beta)?;
        let spec = spectral::delta_e(&a, &s, &e, &basis)?.delta_e;
        let freq = kubo::delta_e_kubo_freq(&kubo::response(&a, &e, &basis)?, &s).delta_e;
        Ok((spec, freq))
    });
    let mut t = Table::new(&["temperature", "beta", "delta_e_spectral", "delta_e_kubo_freq", "rel_gap"]);
    let mut worst = 0.0_f64;
    for ((&temp, &beta), row) in cfg.temperatures.iter().zip(&betas).zip(rows) {
        let (spec, freq) = row?;
        let gap = relative_gap(spec, freq, 0.0);
        worst = worst.max(gap);
        t.push_numeric(&[temp, beta, spec, freq, gap]);
    }
    diag.insert("max_rel_gap".into(), worst);
    Ok(t)
}

fn sweep(cfg: &ExperimentConfig) -> DetuningSweep {
    DetuningSweep {
        half_width: cfg.half_width,
        points: cfg.points,
        n_max: cfg.n_max,
    }
}

fn sweep_detuning(cfg: &ExperimentConfig, diag: &mut BTreeMap<String, f64>) -> CliResult<Table> {
    let c = ResonanceConfig::new(cfg.omega1, cfg.omega1, cfg.beta, cfg.gamma, cfg.eta)?;
    let cmp = resonance::compare_routes_near_resonance(&c, &sweep(cfg))?;
    diag.insert("n_max".into(), cmp.n_max as f64);
    diag.insert("closed_form_weight".into(), cmp.weight);
    diag.insert("window_mass".into(), cmp.window_mass);
    diag.insert("integrated_spectral".into(), cmp.integrated_spectral);
    diag.insert("weight_ratio".into(), cmp.weight_ratio);
    diag.insert("near_resonance_gap".into(), cmp.near_resonance_gap);
    Ok(cmp.to_table())
}

fn sweep_eta(cfg: &ExperimentConfig, diag: &mut BTreeMap<String, f64>) -> CliResult<Table> {
    let c = ResonanceConfig::new(cfg.omega1, cfg.omega1, cfg.beta, cfg.gamma, cfg.etas[0])?;
    let rows = resonance::eta_scaling_study(&c, &cfg.etas, &sweep(cfg))?;
    for pair in rows.windows(2) {
        let key = format!("ratio_{}_{}", pair[0].eta, pair[1].eta);
        diag.insert(key, pair[1].delta_e / pair[0].delta_e);
    }
    Ok(resonance::eta_table(&rows))
}

fn propagate(cfg: &ExperimentConfig, diag: &mut BTreeMap<String, f64>) -> CliResult<Table> {
    let n_max = resolve_n_max(cfg, cfg.beta)?;
    let (basis, a) = setup(cfg, n_max)?;
    let ensemble = make_ensemble(&basis, cfg.beta)?;
    let s = signal(cfg)?;
    let run = run_window(cfg, &s)?;
    let rep = delta_e_propagated(&ensemble, &a, &s, &basis, &run)?;
    let predicted = spectral::delta_e(&a, &s, &ensemble, &basis)?.delta_e;
    let halved = delta_e_propagated(&ensemble, &a, &s, &basis, &run.halved())?.result.delta_e;
    diag.insert("n_max".into(), n_max as f64);
    diag.insert("delta_e".into(), rep.result.delta_e);
    diag.insert("delta_e_spectral".into(), predicted);
    diag.insert("ratio_to_spectral".into(), rep.result.delta_e / predicted);
    diag.insert("dt_halving_gap".into(), relative_gap(rep.result.delta_e, halved, 0.0));
    if n_max >= 2 {
        let (b2, a2) = setup(cfg, n_max / 2)?;
        let e2 = make_ensemble(&b2, cfg.beta)?;
        let coarse = delta_e_propagated(&e2, &a2, &s, &b2, &run)?.result.delta_e;
        diag.insert("n_max_halving_gap".into(), relative_gap(rep.result.delta_e, coarse, 0.0));
    }
    diag.insert("norm_drift".into(), rep.norm_drift);
    diag.insert("top_shell_leakage".into(), rep.leakage);
    diag.insert("leakage_ok".into(), f64::from(u8::from(rep.leakage_ok)));
    diag.insert("dt".into(), run.step());
    diag.insert("t_start".into(), run.t_start);
    diag.insert("t_end".into(), run.t_end);
    Ok(rep.history_table())
}

fn audit(cfg: &ExperimentConfig, diag: &mut BTreeMap<String, f64>) -> CliResult<Table> {
    let n_max = resolve_n_max(cfg, cfg.beta)?;
    let rows = counter_rotating_audit(
        &AuditConfig {
            omega1: cfg.omega1,
            omega2: cfg.omega2,
            beta: cfg.beta,
            gamma: cfg.gamma,
            n_max,
            dt: cfg.dt,
        },
        &cfg.etas,
    )?;
    diag.insert("n_max".into(), n_max as f64);
    diag.insert(
        "all_leakage_ok".into(),
        f64::from(u8::from(rows.iter().all(|r| r.leakage_ok))),
    );
    Ok(audit_table(&rows))
}
