// SPDX-License-Identifier: Apache-2.0

//! Force estimation from consecutive state estimates, and its accuracy.
//!
//! Since `B` has full column rank, an unbiased estimator of the unknown
//! input is
//!
//! ```text
//! fhat_k = B^+ [xhat_{k+1|k+1} - A xhat_{k|k}],   B^+ = (B^T B)^{-1} B^T,
//! ```
//!
//! and its mean squared error is the three-term sum
//!
//! ```text
//! eps2_f = M H A P_k A^T H^T M^T + M H Q H^T M^T + M R M^T
//! ```
//!
//! with `M = B^+ L` and `P_k = P_{k|k}` the state error covariance. The
//! estimate for step `k` exists only after the measurement at `k + 1` has
//! been processed; the API keeps that one-step latency explicit through the
//! state indices.

use nalgebra::{DMatrix, DVector};

use crate::discretize::DiscreteModel;
use crate::error::{Error, Result};
use crate::matkernel;
use crate::umvfilter::{FilterState, StepGains};

/// Force estimate at step `k` bundled with its theoretical accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceEstimate {
    /// Estimated input `fhat_k`.
    pub f_hat: DVector<f64>,
    /// Step index `k` of the estimated input.
    pub k: usize,
    /// Theoretical mean squared error `eps2_{f_k}` (m x m, symmetric PSD).
    pub mse_theory: DMatrix<f64>,
}

/// `B^+ (x_next - A x_curr)` without the index bookkeeping; shared with the
/// Monte Carlo fast path.
pub(crate) fn force_from_means(
    x_next: &DVector<f64>,
    x_curr: &DVector<f64>,
    dm: &DiscreteModel,
) -> DVector<f64> {
    dm.b_pinv() * (x_next - dm.a() * x_curr)
}

/// Estimates the input applied at step `k` from the filter states at `k` and
/// `k + 1`.
///
/// Errors when the states are not consecutive.
pub fn estimate_force(
    next: &FilterState,
    curr: &FilterState,
    dm: &DiscreteModel,
) -> Result<DVector<f64>> {
    if next.k() != curr.k() + 1 {
        return Err(Error::Sequencing {
            curr: curr.k(),
            next: next.k(),
        });
    }
    if curr.x_hat().len() != dm.n_states() {
        return Err(Error::Dimension(format!(
            "filter state has n = {}, model has n = {}",
            curr.x_hat().len(),
            dm.n_states()
        )));
    }
    Ok(force_from_means(next.x_hat(), curr.x_hat(), dm))
}

/// Theoretical mean squared error of the force estimate at step `k`.
///
/// `gains` must be the gains of the step from `k` to `k + 1` and `fs` the
/// filter state at `k`. The discrete measurement covariance is
/// time-invariant, so `R_{k+1} = R`.
pub fn force_mse_theoretical(
    gains: &StepGains,
    fs: &FilterState,
    dm: &DiscreteModel,
) -> Result<DMatrix<f64>> {
    if fs.p().nrows() != dm.n_states() {
        return Err(Error::Dimension(format!(
            "filter state has n = {}, model has n = {}",
            fs.p().nrows(),
            dm.n_states()
        )));
    }
    let mha = &gains.m * dm.h() * dm.a();
    let state_term = &mha * fs.p() * mha.transpose();
    Ok(matkernel::symmetrize(
        &(state_term + force_mse_lower_bound(gains, dm)?),
    ))
}

/// The two noise terms of the accuracy formula,
/// `M H Q H^T M^T + M R M^T`; a lower bound on the full mean squared error
/// since the omitted state term is PSD.
pub fn force_mse_lower_bound(gains: &StepGains, dm: &DiscreteModel) -> Result<DMatrix<f64>> {
    if gains.m.ncols() != dm.n_outputs() {
        return Err(Error::Dimension(format!(
            "gain has p = {}, model has p = {}",
            gains.m.ncols(),
            dm.n_outputs()
        )));
    }
    let mh = &gains.m * dm.h();
    let process = &mh * dm.q() * mh.transpose();
    let measurement = &gains.m * dm.r() * gains.m.transpose();
    Ok(matkernel::symmetrize(&(process + measurement)))
}

/// Convenience: force estimate and its accuracy in one call.
pub fn estimate_with_accuracy(
    next: &FilterState,
    curr: &FilterState,
    gains: &StepGains,
    dm: &DiscreteModel,
) -> Result<ForceEstimate> {
    Ok(ForceEstimate {
        f_hat: estimate_force(next, curr, dm)?,
        k: curr.k(),
        mse_theory: force_mse_theoretical(gains, curr, dm)?,
    })
}
