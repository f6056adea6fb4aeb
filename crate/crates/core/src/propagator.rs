//! Exact-dynamics oracle: integrates `i d/dt psi = (H0 - A q(t)) psi` from
//! every thermally populated eigenstate and measures the ensemble energy
//! change directly.
//!
//! `H0` is diagonal in the product basis, so the state space splits into the
//! connected components of `A`'s sparsity pattern; each component evolves
//! independently. Within a component the step is a symmetric split of exact
//! `H0` phase rotations and exact interaction kicks with the drive sampled at
//! each kick's midpoint, raised to fourth order by Suzuki's five-stage
//! composition. Every stage is unitary.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drive::{DriveSignal, DECAY_TOL};
use crate::error::{invalid, Error, Result};
use crate::fockspace::{build_basis, full_coupling, rwa_coupling, HermitianOperator, OscillatorSpec, ProductBasis};
use crate::par::{map_slice, tree_sum};
use crate::result::{relative_gap, DissipationResult, Meta, Route};
use crate::table::Table;
use crate::thermal::{make_ensemble, ThermalEnsemble};

/// Largest tolerated `| <psi|psi> - 1 |`.
pub const NORM_LIMIT: f64 = 1e-8;
/// Largest tolerated growth of weighted population in the top two shells.
pub const LEAKAGE_LIMIT: f64 = 1e-6;
const TOP_SHELLS: usize = 2;
const CHECKPOINTS: usize = 64;

/// Time window and step for one propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationRun {
    pub t_start: f64,
    pub t_end: f64,
    /// Requested step; the actual step divides the window evenly.
    pub dt: f64,
}

impl PropagationRun {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
        }
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(invalid("horizon", format!("need t_start < t_end, got [{t_start}, {t_end}]")));
        }
        Ok(Self { t_start, t_end, dt })
    }

    /// Window over which `signal` exceeds [`DECAY_TOL`] of its peak.
    pub fn covering(signal: &DriveSignal, dt: f64) -> Result<Self> {
        let (a, b) = signal.support(0.5 * DECAY_TOL);
        Self::new(a, b, dt)
    }

    pub fn steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps() as f64
    }

    pub fn halved(&self) -> Self {
        Self {
            dt: 0.5 * self.step(),
            ..*self
        }
    }
}

/// Suzuki fourth-order stage weights.
fn stage_weights() -> [f64; 5] {
    let p = 1.0 / (4.0 - 4f64.powf(1.0 / 3.0));
    [p, p, 1.0 - 4.0 * p, p, p]
}

#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    energies: Vec<f64>,
    eigvals: Vec<f64>,
    eigvecs: DMatrix<Complex64>,
    top: Vec<bool>,
}

/// Invariant blocks of `H0 - A q(t)`, each with `A` diagonalized.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    blocks: Vec<Block>,
}

/// Connected components of the nonzero pattern of `a`, each sorted, ordered
/// by smallest member.
pub fn invariant_blocks(a: &HermitianOperator) -> Vec<Vec<usize>> {
    let n = a.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j, _) in a.nonzeros() {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Final state of one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolved {
    pub state: DVector<Complex64>,
    pub norm_drift: f64,
}

struct BlockOutcome {
    /// `(global initial index, energy change, norm drift)`
    per_state: Vec<(usize, f64, f64)>,
    /// weighted top-shell population at each checkpoint, minus initial
    leakage: Vec<f64>,
    /// weighted `<H0>` and norm at checkpoints
    history: Vec<(f64, f64, f64)>,
}

impl Propagator {
    pub fn new(a: &HermitianOperator, basis: &ProductBasis) -> Result<Self> {
        a.ensure_dim(basis.dim())?;
        let top_set = basis.top_shell_indices(TOP_SHELLS);
        let mut is_top = vec![false; basis.dim()];
        for i in top_set {
            is_top[i] = true;
        }
        let groups = invariant_blocks(a);
        let mut blocks = Vec::with_capacity(groups.len());
        for indices in groups {
            let k = indices.len();
            let sub = DMatrix::from_fn(k, k, |i, j| a.get(indices[i], indices[j]));
            let eig = SymmetricEigen::new(sub);
            blocks.push(Block {
                energies: indices.iter().map(|&i| basis.energy(i)).collect(),
                top: indices.iter().map(|&i| is_top[i]).collect(),
                eigvals: eig.eigenvalues.iter().copied().collect(),
                eigvecs: eig.eigenvectors,
                indices,
            });
        }
        Ok(Self {
            dim: basis.dim(),
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }

    /// Evolves the columns of `psi` (block-local coordinates) under drive `q`.
    /// Calls `probe(psi, t)` at evenly spaced checkpoints including both ends.
    ///
    /// Works in `A`'s eigenbasis, where kicks are diagonal; adjacent free
    /// half-steps are merged into one precomputed `U^+ exp(-i H0 s) U`.
    fn evolve_block<F, P>(
        &self,
        block: &Block,
        psi: &mut DMatrix<Complex64>,
        q: &F,
        run: &PropagationRun,
        mut probe: P,
    ) -> Result<()>
    where
        F: Fn(f64) -> f64,
        P: FnMut(&DMatrix<Complex64>, f64) -> Result<()>,
    {
        let steps = run.steps();
        let h = run.step();
        let c = stage_weights();
        let u = &block.eigvecs;
        let free = |tau: f64| -> DMatrix<Complex64> {
            let mut d = u.clone();
            for (i, e) in block.energies.iter().enumerate() {
                let phase = Complex64::from_polar(1.0, -e * tau);
                for k in 0..d.ncols() {
                    d[(i, k)] *= phase;
                }
            }
            u.ad_mul(&d)
        };
        let head = free(0.5 * c[0] * h);
        let tail = free(0.5 * c[4] * h);
        let between: Vec<SplitMatrix> = (0..5)
            .map(|i| SplitMatrix::new(&free(0.5 * (c[i] + c[(i + 1) % 5]) * h)))
            .collect();
        let cols = psi.ncols();
        let mut state = SplitState::new(&(&head * u.ad_mul(psi)));
        let every = (steps / CHECKPOINTS).max(1);
        probe(psi, run.t_start)?;
        for s in 0..steps {
            let mut t = run.t_start + s as f64 * h;
            for (stage, &w) in c.iter().enumerate() {
                let amp = q(t + 0.5 * w * h) * w * h;
                for (k, &a) in block.eigvals.iter().enumerate() {
                    let (sin, cos) = (a * amp).sin_cos();
                    for j in 0..cols {
                        let (re, im) = (state.p[(k, j)], state.p[(k, cols + j)]);
                        state.p[(k, j)] = re * cos - im * sin;
                        state.p[(k, cols + j)] = re * sin + im * cos;
                    }
                }
                t += w * h;
                if stage < 4 {
                    state.apply(&between[stage]);
                }
            }
            let last = s + 1 == steps;
            if last || (s + 1) % every == 0 {
                psi.copy_from(&(u * (&tail * state.to_complex())));
                probe(psi, run.t_start + (s + 1) as f64 * h)?;
            }
            if !last {
                state.apply(&between[4]);
            }
        }
        Ok(())
    }

    /// Propagates an arbitrary state under drive `q` over `run`.
    pub fn evolve_with<F: Fn(f64) -> f64 + Sync>(
        &self,
        psi0: &DVector<Complex64>,
        q: F,
        run: &PropagationRun,
    ) -> Result<Evolved> {
        if psi0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: psi0.len(),
            });
        }
        let norm0 = psi0.norm_squared();
        let parts = map_slice(&self.blocks, |block| -> Result<(Vec<usize>, DMatrix<Complex64>)> {
            let mut psi = DMatrix::from_fn(block.indices.len(), 1, |i, _| psi0[block.indices[i]]);
            if psi.iter().all(|z| z.norm_sqr() == 0.0) {
                return Ok((block.indices.clone(), psi));
            }
            self.evolve_block(block, &mut psi, &q, run, |_, _| Ok(()))?;
            Ok((block.indices.clone(), psi))
        });
        let mut state = DVector::zeros(self.dim);
        for part in parts {
            let (indices, psi) = part?;
            for (local, &g) in indices.iter().enumerate() {
                state[g] = psi[(local, 0)];
            }
        }
        let norm_drift = (state.norm_squared() - norm0).abs();
        if norm_drift > NORM_LIMIT {
            return Err(Error::NormDrift {
                drift: norm_drift,
                limit: NORM_LIMIT,
                time: run.t_end,
            });
        }
        Ok(Evolved { state, norm_drift })
    }

    fn ensemble_block(
        &self,
        block: &Block,
        ensemble: &ThermalEnsemble,
        q: &(dyn Fn(f64) -> f64 + Sync),
        run: &PropagationRun,
    ) -> Result<BlockOutcome> {
        let starts: Vec<usize> = (0..block.indices.len())
            .filter(|&l| ensemble.weight(block.indices[l]) > 0.0)
            .collect();
        let k = block.indices.len();
        if starts.is_empty() {
            return Ok(BlockOutcome {
                per_state: Vec::new(),
                leakage: vec![0.0; CHECKPOINTS + 2],
                history: Vec::new(),
            });
        }
        let weights: Vec<f64> = starts.iter().map(|&l| ensemble.weight(block.indices[l])).collect();
        let mut psi = DMatrix::zeros(k, starts.len());
        for (col, &l) in starts.iter().enumerate() {
            psi[(l, col)] = Complex64::new(1.0, 0.0);
        }
        let top_pop = |psi: &DMatrix<Complex64>| -> f64 {
            let mut acc = 0.0;
            for (col, w) in weights.iter().enumerate() {
                let mut p = 0.0;
                for i in 0..k {
                    if block.top[i] {
                        p += psi[(i, col)].norm_sqr();
                    }
                }
                acc += w * p;
            }
            acc
        };
        let initial_top = top_pop(&psi);
        let mut leakage = Vec::new();
        let mut history = Vec::new();
        let isolated = block.eigvals.iter().all(|&a| a == 0.0);
        let probe = |psi: &DMatrix<Complex64>, t: f64| -> Result<()> {
            let mut energy = 0.0;
            let mut norm = 0.0;
            for (col, w) in weights.iter().enumerate() {
                let n2: f64 = psi.column(col).iter().map(|z| z.norm_sqr()).sum();
                let drift = (n2 - 1.0).abs();
                if drift > NORM_LIMIT {
                    return Err(Error::NormDrift {
                        drift,
                        limit: NORM_LIMIT,
                        time: t,
                    });
                }
                let e: f64 = psi
                    .column(col)
                    .iter()
                    .zip(&block.energies)
                    .map(|(z, e)| z.norm_sqr() * e)
                    .sum();
                energy += w * e;
                norm += w * n2;
            }
            history.push((t, energy, norm));
            leakage.push(top_pop(psi) - initial_top);
            Ok(())
        };
        if isolated {
            let mut probe = probe;
            probe(&psi, run.t_start)?;
            probe(&psi, run.t_end)?;
        } else {
            self.evolve_block(block, &mut psi, &q, run, probe)?;
        }
        let per_state = starts
            .iter()
            .enumerate()
            .map(|(col, &l)| {
                let e0 = block.energies[l];
                // sum_k |psi_k|^2 (E_k - E_n), free of large-energy cancellation
                let de: f64 = psi
                    .column(col)
                    .iter()
                    .zip(&block.energies)
                    .map(|(z, e)| z.norm_sqr() * (e - e0))
                    .sum();
                let n2: f64 = psi.column(col).iter().map(|z| z.norm_sqr()).sum();
                (block.indices[l], de, (n2 - 1.0).abs())
            })
            .collect();
        Ok(BlockOutcome {
            per_state,
            leakage,
            history,
        })
    }

    /// Ensemble-weighted energy change `sum_n P_n (<psi_n(T)|H0|psi_n(T)> - E_n)`.
    pub fn delta_e(
        &self,
        ensemble: &ThermalEnsemble,
        signal: &DriveSignal,
        run: &PropagationRun,
    ) -> Result<PropagationReport> {
        if ensemble.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: ensemble.dim(),
            });
        }
        check_run_decay(signal, run)?;
        let q = |t: f64| signal.value(t);
        let outcomes = map_slice(&self.blocks, |b| self.ensemble_block(b, ensemble, &q, run));
        let outcomes: Vec<BlockOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

        let mut per_state = vec![0.0; self.dim];
        let mut norm_drift = 0.0_f64;
        for o in &outcomes {
            for &(g, de, drift) in &o.per_state {
                per_state[g] = ensemble.weight(g) * de;
                norm_drift = norm_drift.max(drift);
            }
        }
        let delta_e = tree_sum(&per_state);
        let scale = tree_sum(&per_state.iter().map(|x| x.abs()).collect::<Vec<_>>());
        let checkpoints = outcomes.iter().map(|o| o.leakage.len()).max().unwrap_or(0);
        let mut leakage = 0.0_f64;
        for c in 0..checkpoints {
            let total: f64 = outcomes.iter().filter_map(|o| o.leakage.get(c)).sum();
            leakage = leakage.max(total);
        }
        let mut history: Vec<(f64, f64, f64)> = Vec::new();
        if let Some(reference) = outcomes.iter().find(|o| o.history.len() == checkpoints) {
            for (c, &(t, _, _)) in reference.history.iter().enumerate() {
                let mut energy = 0.0;
                let mut norm = 0.0;
                for o in &outcomes {
                    if let Some(&(_, e, n)) = o.history.get(c) {
                        energy += e;
                        norm += n;
                    } else if let Some(&(_, e, n)) = o.history.last() {
                        energy += e;
                        norm += n;
                    }
                }
                history.push((t, energy, norm));
            }
        }
        let mut result = DissipationResult::new(delta_e, Route::Propagator, scale);
        result.meta = Meta {
            beta: Some(ensemble.beta()),
            ..Meta::default()
        };
        let result = result
            .with_diagnostic("norm_drift", norm_drift)
            .with_diagnostic("top_shell_leakage", leakage)
            .with_diagnostic("dt", run.step())
            .with_diagnostic("t_start", run.t_start)
            .with_diagnostic("t_end", run.t_end);
        Ok(PropagationReport {
            result,
            norm_drift,
            leakage,
            leakage_ok: leakage < LEAKAGE_LIMIT,
            history,
        })
    }
}

/// Complex matrix as real and imaginary parts, so products run on the real
/// matrix kernel.
struct SplitMatrix {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl SplitMatrix {
    fn new(m: &DMatrix<Complex64>) -> Self {
        Self {
            re: m.map(|z| z.re),
            im: m.map(|z| z.im),
        }
    }
}

/// Columns stored as `[Re | Im]`.
struct SplitState {
    p: DMatrix<f64>,
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    cols: usize,
}

impl SplitState {
    fn new(m: &DMatrix<Complex64>) -> Self {
        let (n, c) = m.shape();
        let p = DMatrix::from_fn(n, 2 * c, |i, j| if j < c { m[(i, j)].re } else { m[(i, j - c)].im });
        Self {
            x: DMatrix::zeros(n, 2 * c),
            y: DMatrix::zeros(n, 2 * c),
            p,
            cols: c,
        }
    }

    fn apply(&mut self, m: &SplitMatrix) {
        m.re.mul_to(&self.p, &mut self.x);
        m.im.mul_to(&self.p, &mut self.y);
        let c = self.cols;
        for j in 0..c {
            for i in 0..self.p.nrows() {
                self.p[(i, j)] = self.x[(i, j)] - self.y[(i, c + j)];
                self.p[(i, c + j)] = self.x[(i, c + j)] + self.y[(i, j)];
            }
        }
    }

    fn to_complex(&self) -> DMatrix<Complex64> {
        let c = self.cols;
        DMatrix::from_fn(self.p.nrows(), c, |i, j| Complex64::new(self.p[(i, j)], self.p[(i, c + j)]))
    }
}

fn check_run_decay(signal: &DriveSignal, run: &PropagationRun) -> Result<()> {
    let peak = signal.peak();
    if peak == 0.0 {
        return Ok(());
    }
    for (edge, t) in [("start", run.t_start), ("end", run.t_end)] {
        let ratio = signal.value(t).abs() / peak;
        if ratio > DECAY_TOL {
            return Err(Error::GridTooShort {
                edge,
                ratio,
                limit: DECAY_TOL,
            });
        }
    }
    Ok(())
}

/// Ensemble propagation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationReport {
    pub result: DissipationResult,
    pub norm_drift: f64,
    /// Largest growth of thermally weighted population in the top two shells.
    pub leakage: f64,
    /// `false` flags `n_max` as too small for this run.
    pub leakage_ok: bool,
    /// `(t, <H0>, norm)`, ensemble weighted, at checkpoints.
    pub history: Vec<(f64, f64, f64)>,
}

impl PropagationReport {
    pub fn history_table(&self) -> Table {
        let mut t = Table::new(&["t", "H0", "norm"]);
        for &(time, e, n) in &self.history {
            t.push_numeric(&[time, e, n]);
        }
        t
    }
}

/// Propagates a single state; the drive must have decayed at both ends of `run`.
pub fn propagate_state(
    psi0: &DVector<Complex64>,
    a: &HermitianOperator,
    signal: &DriveSignal,
    basis: &ProductBasis,
    run: &PropagationRun,
) -> Result<Evolved> {
    check_run_decay(signal, run)?;
    Propagator::new(a, basis)?.evolve_with(psi0, |t| signal.value(t), run)
}

/// Exact thermal energy change, started from each populated eigenstate.
pub fn delta_e_propagated(
    ensemble: &ThermalEnsemble,
    a: &HermitianOperator,
    signal: &DriveSignal,
    basis: &ProductBasis,
    run: &PropagationRun,
) -> Result<PropagationReport> {
    let mut report = Propagator::new(a, basis)?.delta_e(ensemble, signal, run)?;
    report.result.meta.n_max = Some(basis.n_max());
    Ok(report)
}

/// Parameters for comparing full and rotating-wave couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub omega1: f64,
    pub omega2: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n_max: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub eta: f64,
    pub delta_e_rwa: f64,
    pub delta_e_full: f64,
    /// `|full - rwa| / rwa`; infinite when the rotating-wave value vanishes.
    pub rel_gap: f64,
    pub leakage_ok: bool,
}

/// Propagates the same ramp drive under both couplings for each `eta`.
pub fn counter_rotating_audit(config: &AuditConfig, etas: &[f64]) -> Result<Vec<AuditRow>> {
    if etas.is_empty() {
        return Err(invalid("eta", "need at least one value"));
    }
    let basis = build_basis(
        &OscillatorSpec::with_omega(config.omega1)?,
        &OscillatorSpec::with_omega(config.omega2)?,
        config.n_max,
    )?;
    let ensemble = make_ensemble(&basis, config.beta)?;
    let rwa = Propagator::new(&rwa_coupling(&basis), &basis)?;
    let full = Propagator::new(&full_coupling(&basis), &basis)?;
    etas.iter()
        .map(|&eta| {
            let signal = DriveSignal::ramp_exp(config.gamma, eta)?;
            let run = PropagationRun::covering(&signal, config.dt)?;
            let r = rwa.delta_e(&ensemble, &signal, &run)?;
            let f = full.delta_e(&ensemble, &signal, &run)?;
            let (dr, df) = (r.result.delta_e, f.result.delta_e);
            let rel_gap = if dr == 0.0 {
                if df == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                (df - dr).abs() / dr.abs()
            };
            Ok(AuditRow {
                eta,
                delta_e_rwa: dr,
                delta_e_full: df,
                rel_gap,
                leakage_ok: r.leakage_ok && f.leakage_ok,
            })
        })
        .collect()
}

pub fn audit_table(rows: &[AuditRow]) -> Table {
    let mut t = Table::new(&["eta", "delta_e_rwa", "delta_e_full", "rel_gap", "leakage_ok"]);
    for r in rows {
        t.push(vec![
            r.eta.into(),
            r.delta_e_rwa.into(),
            r.delta_e_full.into(),
            r.rel_gap.into(),
            (r.leakage_ok as usize).into(),
        ]);
    }
    t
}

/// `relative_gap` between propagated and predicted values, for reporting.
pub fn oracle_gap(propagated: f64, predicted: f64) -> f64 {
    relative_gap(propagated, predicted, 0.0)
}
