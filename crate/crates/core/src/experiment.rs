// SPDX-License-Identifier: Apache-2.0

//! Single-run and Monte Carlo experiment orchestration.
//!
//! A single run chains simulation, the unbiased filter and the force
//! estimator, and attaches the theoretical accuracy to every step. A Monte
//! Carlo ensemble repeats the run over independent noise sub-streams and
//! reports the per-step numerical accuracy
//!
//! ```text
//! V_N(f_k) = 1/N_M sum_i (f_k^i - fhat_k^i)^2
//! ```
//!
//! alongside the theoretical accuracy, their ratio, and ensemble bias
//! curves for state and force.
//!
//! Gains and covariances of the filter never depend on the data, so the
//! ensemble shares one precomputed schedule; runs then only propagate the
//! estimate mean. The shared helpers guarantee the fast path is
//! bit-identical to chaining [`umvfilter::update`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::discretize::DiscreteModel;
use crate::error::{Error, Result};
use crate::inputestim;
use crate::matkernel;
use crate::simkit::{self, ForceSignal, Trajectory};
use crate::umvfilter::{self, FilterState, StepGains};

/// First step index considered past the initialization transient for the
/// benchmark scenario.
pub const DEFAULT_STEADY_FROM: usize = 50;

/// How the filter is initialized at `k = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Copy the true initial state (reproducible matched start).
    Truth,
    /// `xhat_0 = H^T (H H^T)^{-1} y_0`: the measurement mapped back through
    /// the observation matrix, zero in unobserved directions.
    FromMeasurement,
    /// An explicit estimate.
    Explicit(DVector<f64>),
}

/// Filter initialization: estimate mode plus `P_0 = p0_scale * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterInit {
    pub mode: InitMode,
    pub p0_scale: f64,
}

impl FilterInit {
    pub fn new(mode: InitMode, p0_scale: f64) -> Result<Self> {
        if !(p0_scale >= 0.0 && p0_scale.is_finite()) {
            return Err(Error::Domain(format!(
                "p0_scale must be >= 0, got {p0_scale}"
            )));
        }
        Ok(Self { mode, p0_scale })
    }

    /// Initial covariance for a model with `n` states.
    pub fn p0(&self, n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n) * self.p0_scale
    }

    fn initial_state(&self, dm: &DiscreteModel, traj: &Trajectory) -> Result<FilterState> {
        let x0 = match &self.mode {
            InitMode::Truth => traj.states[0].clone(),
            InitMode::FromMeasurement => {
                let hht = matkernel::symmetrize(&(dm.h() * dm.h().transpose()));
                let inv = matkernel::spd_inverse(&hht)
                    .map_err(|_| Error::Config("H is row-rank deficient; cannot initialize from the measurement".into()))?;
                dm.h().transpose() * inv * &traj.measurements[0]
            }
            InitMode::Explicit(x0) => {
                if x0.len() != dm.n_states() {
                    return Err(Error::Dimension(format!(
                        "explicit initial estimate has length {}, model has n = {}",
                        x0.len(),
                        dm.n_states()
                    )));
                }
                x0.clone()
            }
        };
        umvfilter::init(x0, self.p0(dm.n_states()))
    }
}

/// The data-independent part of a filter pass: per-step gains, filtered
/// covariances and theoretical force accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSchedule {
    /// Gains of the step `k -> k+1`, `k = 0..steps-1`.
    pub gains: Vec<StepGains>,
    /// `P_{k|k}`, `k = 0..steps`.
    pub covariances: Vec<DMatrix<f64>>,
    /// `eps2_{f_k}`, `k = 0..steps-1`.
    pub force_mse: Vec<DMatrix<f64>>,
}

/// Precomputes the gain/covariance/accuracy schedule for `steps` records.
///
/// Built by driving the full update with zero measurements; gains and
/// covariances do not depend on the data, so the schedule is bit-identical
/// to what any run observes.
pub fn filter_schedule(dm: &DiscreteModel, p0: &DMatrix<f64>, steps: usize) -> Result<FilterSchedule> {
    if steps == 0 {
        return Err(Error::Domain("steps must be >= 1".into()));
    }
    let mut fs = umvfilter::init(DVector::zeros(dm.n_states()), p0.clone())?;
    let zero_y = DVector::zeros(dm.n_outputs());
    let mut gains = Vec::with_capacity(steps - 1);
    let mut covariances = Vec::with_capacity(steps);
    let mut force_mse = Vec::with_capacity(steps.saturating_sub(1));
    covariances.push(fs.p().clone());
    for _ in 0..steps - 1 {
        let (next, step_gains) = umvfilter::update(&fs, &zero_y, dm)?;
        force_mse.push(inputestim::force_mse_theoretical(&step_gains, &fs, dm)?);
        covariances.push(next.p().clone());
        gains.push(step_gains);
        fs = next;
    }
    Ok(FilterSchedule {
        gains,
        covariances,
        force_mse,
    })
}

/// Output of one simulate-filter-estimate chain.
///
/// The force series have length `steps - 1`: the estimate of `f_k` exists
/// only once `y_{k+1}` has been processed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trajectory: Trajectory,
    /// `xhat_{k|k}`, `k = 0..steps`.
    pub x_hat: Vec<DVector<f64>>,
    /// `fhat_k`, `k = 0..steps-1`.
    pub f_hat: Vec<DVector<f64>>,
    /// `fhat_k - f_k`.
    pub f_err: Vec<DVector<f64>>,
    /// Theoretical accuracy per force step.
    pub mse_theory: Vec<DMatrix<f64>>,
}

/// Runs one simulation from the truth start `x0` and chains the full
/// filter/estimator pass over it.
pub fn run_single(
    dm: &DiscreteModel,
    sig: &ForceSignal,
    init: &FilterInit,
    x0: &DVector<f64>,
    steps: usize,
    seed: u64,
) -> Result<RunResult> {
    let trajectory = simkit::simulate_run(dm, sig, x0, steps, seed, 0)?;
    run_over(dm, init, trajectory)
}

/// Filter and estimate over an existing trajectory.
pub fn run_over(dm: &DiscreteModel, init: &FilterInit, trajectory: Trajectory) -> Result<RunResult> {
    let steps = trajectory.steps();
    let mut fs = init.initial_state(dm, &trajectory)?;
    let mut x_hat = Vec::with_capacity(steps);
    let mut f_hat = Vec::with_capacity(steps.saturating_sub(1));
    let mut f_err = Vec::with_capacity(steps.saturating_sub(1));
    let mut mse_theory = Vec::with_capacity(steps.saturating_sub(1));
    x_hat.push(fs.x_hat().clone());

    for k in 0..steps - 1 {
        let (next, gains) = umvfilter::update(&fs, &trajectory.measurements[k + 1], dm)?;
        let estimate = inputestim::estimate_with_accuracy(&next, &fs, &gains, dm)?;
        f_err.push(&estimate.f_hat - &trajectory.forces[k]);
        f_hat.push(estimate.f_hat);
        mse_theory.push(estimate.mse_theory);
        x_hat.push(next.x_hat().clone());
        fs = next;
    }

    Ok(RunResult {
        trajectory,
        x_hat,
        f_hat,
        f_err,
        mse_theory,
    })
}

/// Ensemble execution options.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOptions {
    /// Fan runs out across threads; the report is identical either way.
    pub parallel: bool,
    /// Debug flag: give every run the same sub-stream (run index 0), which
    /// collapses the ensemble onto a single realization.
    pub identical_seeds: bool,
    /// First step of the steady-state window used for the grand-average
    /// ratio.
    pub steady_from: usize,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self {
            parallel: true,
            identical_seeds: false,
            steady_from: DEFAULT_STEADY_FROM,
        }
    }
}

/// Ensemble accuracy report.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub n_runs: usize,
    pub steps: usize,
    pub steady_from: usize,
    /// Per-step numerical accuracy: mean outer product of the force error
    /// (m x m, scalar in the single-input case). Length `steps - 1`.
    pub v_numerical: Vec<DMatrix<f64>>,
    /// Per-step theoretical accuracy. Length `steps - 1`.
    pub mse_theory: Vec<DMatrix<f64>>,
    /// Ensemble mean force error per step. Length `steps - 1`.
    pub bias_f: Vec<DVector<f64>>,
    /// Ensemble mean state error per step. Length `steps`.
    pub bias_x: Vec<DVector<f64>>,
    /// Per-step `V_N / eps2` averaged over input components. Length
    /// `steps - 1`.
    pub ratio: Vec<f64>,
    /// Mean of `ratio` over the steady-state window.
    pub grand_ratio: f64,
    /// Componentwise time average of `bias_f`.
    pub grand_bias_f: DVector<f64>,
}

struct ReducedRun {
    f_err: Vec<DVector<f64>>,
    x_err: Vec<DVector<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn reduced_run(
    dm: &DiscreteModel,
    sig: &ForceSignal,
    init: &FilterInit,
    x0: &DVector<f64>,
    steps: usize,
    seed: u64,
    run_index: u64,
    schedule: &FilterSchedule,
) -> Result<ReducedRun> {
    let traj = simkit::simulate_run(dm, sig, x0, steps, seed, run_index)?;
    let fs0 = init.initial_state(dm, &traj)?;
    let mut x_hat = fs0.x_hat().clone();

    let mut f_err = Vec::with_capacity(steps - 1);
    let mut x_err = Vec::with_capacity(steps);
    x_err.push(&traj.states[0] - &x_hat);
    for k in 0..steps - 1 {
        let next = umvfilter::filtered_mean(dm, &schedule.gains[k].l, &x_hat, &traj.measurements[k + 1]);
        let f_hat = inputestim::force_from_means(&next, &x_hat, dm);
        f_err.push(&f_hat - &traj.forces[k]);
        x_err.push(&traj.states[k + 1] - &next);
        x_hat = next;
    }
    Ok(ReducedRun { f_err, x_err })
}

/// Runs an `n_runs`-strong ensemble on independent sub-streams and
/// assembles the accuracy report.
///
/// The reduction is keyed by run index and evaluated in index order, so
/// parallel and serial execution produce the identical report.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    dm: &DiscreteModel,
    sig: &ForceSignal,
    init: &FilterInit,
    x0: &DVector<f64>,
    steps: usize,
    n_runs: usize,
    base_seed: u64,
    opts: &MonteCarloOptions,
) -> Result<MonteCarloReport> {
    if n_runs < 2 {
        return Err(Error::Domain(format!(
            "Monte Carlo needs n_runs >= 2, got {n_runs}"
        )));
    }
    if steps < 2 {
        return Err(Error::Domain("Monte Carlo needs steps >= 2".into()));
    }
    let schedule = filter_schedule(dm, &init.p0(dm.n_states()), steps)?;

    let run_one = |i: usize| -> Result<ReducedRun> {
        let run_index = if opts.identical_seeds { 0 } else { i as u64 };
        reduced_run(dm, sig, init, x0, steps, base_seed, run_index, &schedule)
    };
    let runs: Vec<ReducedRun> = if opts.parallel {
        (0..n_runs).into_par_iter().map(run_one).collect::<Result<_>>()?
    } else {
        (0..n_runs).map(run_one).collect::<Result<_>>()?
    };

    let n = dm.n_states();
    let m = dm.n_inputs();
    let inv_runs = 1.0 / n_runs as f64;

    let mut v_numerical = vec![DMatrix::<f64>::zeros(m, m); steps - 1];
    let mut bias_f = vec![DVector::<f64>::zeros(m); steps - 1];
    let mut bias_x = vec![DVector::<f64>::zeros(n); steps];
    for run in &runs {
        for k in 0..steps - 1 {
            let e = &run.f_err[k];
            v_numerical[k] += e * e.transpose();
            bias_f[k] += e;
        }
        for (acc, e) in bias_x.iter_mut().zip(&run.x_err) {
            *acc += e;
        }
    }
    for v in &mut v_numerical {
        *v *= inv_runs;
    }
    for b in &mut bias_f {
        *b *= inv_runs;
    }
    for b in &mut bias_x {
        *b *= inv_runs;
    }

    let mse_theory = schedule.force_mse;
    let ratio: Vec<f64> = v_numerical
        .iter()
        .zip(&mse_theory)
        .map(|(v, e)| {
            let mut acc = 0.0;
            for i in 0..m {
                acc += v[(i, i)] / e[(i, i)];
            }
            acc / m as f64
        })
        .collect();

    let steady_from = opts.steady_from.min(ratio.len().saturating_sub(1));
    let steady = &ratio[steady_from..];
    let grand_ratio = steady.iter().sum::<f64>() / steady.len() as f64;
    let grand_bias_f = time_average_bias(&bias_f)?;

    Ok(MonteCarloReport {
        n_runs,
        steps,
        steady_from,
        v_numerical,
        mse_theory,
        bias_f,
        bias_x,
        ratio,
        grand_ratio,
        grand_bias_f,
    })
}

/// Arithmetic mean of an error series; errors on an empty series.
pub fn time_average_bias(errors: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = errors
        .first()
        .ok_or_else(|| Error::Domain("time average of an empty series".into()))?;
    let mut acc = DVector::zeros(first.len());
    for e in errors {
        acc += e;
    }
    Ok(acc / errors.len() as f64)
}
