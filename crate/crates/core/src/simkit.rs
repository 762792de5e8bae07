// SPDX-License-Identifier: Apache-2.0

//! Ground-truth simulation of the discrete system with seeded noise.
//!
//! Trajectories follow `x_{k+1} = A x_k + B f_k + w_k`, `y_k = H x_k + v_k`
//! exactly in discrete time, with `w_k ~ N(0, Q)` and `v_k ~ N(0, R)`. No
//! continuous-time integration happens here; the discretization module owns
//! the continuous-to-discrete bridge.
//!
//! # Random streams
//!
//! All randomness comes from counter-based ChaCha12 generators. The 256-bit
//! key is expanded from the scenario seed, and each (run, channel) pair gets
//! its own 64-bit stream id:
//!
//! ```text
//! stream id = run_index * 8 + channel     (channels: force 0, process 1,
//!                                          measurement 2)
//! ```
//!
//! Distinct stream ids select disjoint ChaCha keystreams, so Monte Carlo
//! runs parallelize without correlation and every draw is reproducible from
//! `(seed, run_index)` alone.

use std::io::BufRead;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::discretize::DiscreteModel;
use crate::error::{Error, Result};
use crate::matkernel;

/// Noise channels drawn from independent sub-streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Force = 0,
    Process = 1,
    Measurement = 2,
}

const CHANNEL_STRIDE: u64 = 8;

/// Deterministic generator for one `(seed, run, channel)` triple.
pub fn stream(seed: u64, run_index: u64, channel: Channel) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(
        run_index
            .checked_mul(CHANNEL_STRIDE)
            .expect("run index out of range")
            + channel as u64,
    );
    rng
}

/// Time-varying scalar force signal.
///
/// Signals are scalar; the simulator requires a single-input model. The
/// benchmark case is `GaussianIid { mean: 1.0, variance: 0.5 }`; the other
/// variants cover deterministic time-varying inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceSignal {
    /// Same value at every step.
    Constant(f64),
    /// `amplitude * sin(frequency * k + phase)`; `frequency` is in radians
    /// per step.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// Independent Gaussian draws from the force sub-stream.
    GaussianIid { mean: f64, variance: f64 },
    /// Step function: value of the segment whose start is the largest one
    /// `<= k`; zero before the first segment. Starts must be strictly
    /// increasing.
    Piecewise(Vec<(u64, f64)>),
    /// Samples loaded from a file, one per step.
    Samples(Vec<f64>),
}

impl ForceSignal {
    /// Loads a sample file: plain text, one decimal value per line, line
    /// index = step. Blank lines are ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("force file {}: {e}", path.display())))?;
        let mut samples = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::Config(format!("force file read: {e}")))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let value: f64 = trimmed.parse().map_err(|_| {
                Error::Config(format!(
                    "force file {}: line {} is not a number: {trimmed:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            samples.push(value);
        }
        Ok(ForceSignal::Samples(samples))
    }

    /// Structural validity: non-negative variance, strictly increasing
    /// piecewise starts, finite parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            ForceSignal::Constant(v) => {
                if !v.is_finite() {
                    return Err(Error::NonFinite("constant force value".into()));
                }
            }
            ForceSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                if ![*amplitude, *frequency, *phase].iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("sinusoid parameters".into()));
                }
            }
            ForceSignal::GaussianIid { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() {
                    return Err(Error::NonFinite("gaussian force parameters".into()));
                }
                if *variance < 0.0 {
                    return Err(Error::Domain(format!(
                        "gaussian force variance must be >= 0, got {variance}"
                    )));
                }
            }
            ForceSignal::Piecewise(segments) => {
                if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::Domain(
                        "piecewise force steps must be strictly increasing".into(),
                    ));
                }
                if segments.iter().any(|(_, v)| !v.is_finite()) {
                    return Err(Error::NonFinite("piecewise force values".into()));
                }
            }
            ForceSignal::Samples(samples) => {
                if samples.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("force sample file values".into()));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates the signal at step `k`, drawing from `rng` only for the
/// stochastic variants. Deterministic given the variant, `k` and the stream
/// state.
pub fn sample_force(sig: &ForceSignal, k: u64, rng: &mut ChaCha12Rng) -> Result<f64> {
    match sig {
        ForceSignal::Constant(v) => Ok(*v),
        ForceSignal::Sinusoid {
            amplitude,
            frequency,
            phase,
        } => Ok(amplitude * (frequency * k as f64 + phase).sin()),
        ForceSignal::GaussianIid { mean, variance } => {
            let z: f64 = rng.sample(StandardNormal);
            Ok(mean + variance.sqrt() * z)
        }
        ForceSignal::Piecewise(segments) => Ok(segments
            .iter()
            .take_while(|(start, _)| *start <= k)
            .last()
            .map(|(_, v)| *v)
            .unwrap_or(0.0)),
        ForceSignal::Samples(samples) => {
            samples
                .get(k as usize)
                .copied()
                .ok_or(Error::ForceExhausted {
                    step: k,
                    len: samples.len(),
                })
        }
    }
}

/// Square-root factor of a symmetric PSD covariance, for sampling
/// `N(0, cov)` as `F z` with `z` standard normal.
///
/// The factorization is by symmetric eigendecomposition so that
/// rank-deficient covariances (the process noise of the optomechanical model
/// has a singular continuous intensity) produce exactly-zero noise along
/// null directions: eigenvalues in `[-1e-12 ||cov||, 0]` are clipped to zero,
/// anything lower is an error.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    factor: DMatrix<f64>,
}

impl GaussianFactor {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if cov.ncols() != n || n == 0 {
            return Err(Error::Dimension("covariance must be square, n > 0".into()));
        }
        matkernel::ensure_finite(cov, "covariance")?;
        let eig = SymmetricEigen::new(matkernel::symmetrize(cov));
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let clip = -1e-12 * scale;
        let mut factor = eig.eigenvectors;
        for i in 0..n {
            let lambda = eig.eigenvalues[i];
            if lambda < clip {
                return Err(Error::NotPositiveSemiDefinite("covariance".into(), lambda));
            }
            let s = lambda.max(0.0).sqrt();
            factor.column_mut(i).scale_mut(s);
        }
        Ok(Self { factor })
    }

    /// One draw; always consumes exactly `n` standard normals regardless of
    /// rank, so stream positions stay aligned across models.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> DVector<f64> {
        let n = self.factor.nrows();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * z
    }
}

/// One simulated sample path of the discrete system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// True states `x_k`, `k = 0..steps`.
    pub states: Vec<DVector<f64>>,
    /// Measurements `y_k`, `k = 0..steps`.
    pub measurements: Vec<DVector<f64>>,
    /// Applied forces `f_k`, `k = 0..steps-1` (the force at the final record
    /// would only influence the unrecorded state `x_steps`).
    pub forces: Vec<DVector<f64>>,
    /// Sampling period; the time of record `k` is `k * dt`.
    pub dt: f64,
    /// Base seed the noise streams were derived from.
    pub seed: u64,
    /// Run index within a Monte Carlo ensemble (0 for single runs).
    pub run_index: u64,
}

impl Trajectory {
    /// Number of recorded steps.
    pub fn steps(&self) -> usize {
        self.states.len()
    }

    /// Time of record `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Simulates `steps` records from `x0` under the given force signal,
/// deriving all noise from `(seed, run_index)`.
///
/// Draw order per step `k`: measurement noise `v_k`, then (for non-final
/// steps) force `f_k` and process noise `w_k`. Each lives on its own
/// sub-stream, so the order only documents reproducibility, it does not
/// couple the channels.
pub fn simulate_run(
    dm: &DiscreteModel,
    sig: &ForceSignal,
    x0: &DVector<f64>,
    steps: usize,
    seed: u64,
    run_index: u64,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Domain("steps must be >= 1".into()));
    }
    if dm.n_inputs() != 1 {
        return Err(Error::Dimension(
            "force signals are scalar; the simulator requires a single-input model".into(),
        ));
    }
    if x0.len() != dm.n_states() {
        return Err(Error::Dimension(format!(
            "x0 has length {}, model has n = {}",
            x0.len(),
            dm.n_states()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("x0".into()));
    }
    sig.validate()?;

    let process = GaussianFactor::new(dm.q())?;
    matkernel::spd_inverse(dm.r()).map_err(|_| Error::NotPositiveDefinite("R".into()))?;
    let measurement = GaussianFactor::new(dm.r())?;

    let mut force_rng = stream(seed, run_index, Channel::Force);
    let mut process_rng = stream(seed, run_index, Channel::Process);
    let mut measurement_rng = stream(seed, run_index, Channel::Measurement);

    let mut states = Vec::with_capacity(steps);
    let mut measurements = Vec::with_capacity(steps);
    let mut forces = Vec::with_capacity(steps.saturating_sub(1));

    let mut x = x0.clone();
    for k in 0..steps {
        let v = measurement.sample(&mut measurement_rng);
        measurements.push(dm.h() * &x + v);
        states.push(x.clone());

        if k + 1 < steps {
            let f = sample_force(sig, k as u64, &mut force_rng)?;
            let w = process.sample(&mut process_rng);
            x = dm.a() * &x + dm.b() * f + w;
            forces.push(DVector::from_row_slice(&[f]));
        }
    }

    Ok(Trajectory {
        states,
        measurements,
        forces,
        dt: dm.dt(),
        seed,
        run_index,
    })
}

/// Single-run convenience wrapper with `run_index = 0`.
pub fn simulate(
    dm: &DiscreteModel,
    sig: &ForceSignal,
    x0: &DVector<f64>,
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    simulate_run(dm, sig, x0, steps, seed, 0)
}
