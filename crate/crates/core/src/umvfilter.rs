// SPDX-License-Identifier: Apache-2.0

//! Unbiased minimum-variance (Kitanidis) filter.
//!
//! For the discrete system `x_{k+1} = A x_k + B f_k + w_k`, `y_k = H x_k +
//! v_k` with the input sequence `f_k` unknown, the state estimate
//!
//! ```text
//! xhat_{k+1|k+1} = A xhat_{k|k} + L_{k+1} [y_{k+1} - H A xhat_{k|k}]
//! ```
//!
//! stays unbiased for any input provided the gain satisfies the constraint
//! `L H B = B`. The gain used here is the minimum-variance one,
//!
//! ```text
//! L = P Ht Ci + [B - P Ht Ci H B] [Bt Ht Ci H B]^{-1} Bt Ht Ci,
//! ```
//!
//! with `P = P_{k+1|k} = A P_{k|k} A^T + Q`, `C = H P Ht + R` and `Ci` its
//! inverse. Measurement-driven only: prediction and update are folded into
//! one step, so there is no exposed predicted mean.

use nalgebra::{DMatrix, DVector};

use crate::discretize::DiscreteModel;
use crate::error::{Error, Result};
use crate::matkernel;

/// Condition number of the innovation covariance beyond which a step logs a
/// warning instead of failing; with `R > 0` true singularity indicates a
/// configuration error, not a runtime state.
const INNOVATION_COND_WARN: f64 = 1e12;

/// Filter state after the measurement at step `k` has been absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    x_hat: DVector<f64>,
    p: DMatrix<f64>,
    k: usize,
}

impl FilterState {
    /// Estimate `xhat_{k|k}`.
    pub fn x_hat(&self) -> &DVector<f64> {
        &self.x_hat
    }

    /// Error covariance `P_{k|k}`.
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Step index `k`.
    pub fn k(&self) -> usize {
        self.k
    }
}

/// Per-step gains and intermediates of one filter update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGains {
    /// Gain `L_{k+1}` (n x p); satisfies `L H B = B`.
    pub l: DMatrix<f64>,
    /// Input-space gain `M_{k+1} = B^+ L_{k+1}` (m x p); satisfies `M H B = I`.
    pub m: DMatrix<f64>,
    /// Innovation covariance `C_{k+1}` (p x p).
    pub c: DMatrix<f64>,
    /// Predicted covariance `P_{k+1|k}` (n x n).
    pub p_pred: DMatrix<f64>,
}

/// Intermediates shared between the gain computation and the covariance
/// update so both sides use identical arithmetic.
struct GainWork {
    /// `P_{k+1|k} H^T C^{-1}` (n x p).
    phc: DMatrix<f64>,
    /// `B - P_{k+1|k} H^T C^{-1} H B` (n x m).
    g: DMatrix<f64>,
    /// `[B^T H^T C^{-1} H B]^{-1}` (m x m).
    s_inv: DMatrix<f64>,
}

/// Creates the filter state at `k = 0` from an initial estimate and a
/// symmetric PSD initial covariance. Neither is specified by the estimation
/// problem itself; the filter forgets them as data arrives.
pub fn init(x0_hat: DVector<f64>, p0: DMatrix<f64>) -> Result<FilterState> {
    if x0_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial estimate".into()));
    }
    if p0.shape() != (x0_hat.len(), x0_hat.len()) {
        return Err(Error::Dimension(format!(
            "P0 must be {n} x {n} to match the initial estimate",
            n = x0_hat.len()
        )));
    }
    let report = matkernel::psd_check(&p0, 1e-12)?;
    if !report.is_psd {
        return Err(Error::NotPositiveSemiDefinite(
            "P0".into(),
            report.min_eigenvalue,
        ));
    }
    Ok(FilterState {
        x_hat: x0_hat,
        p: matkernel::symmetrize(&p0),
        k: 0,
    })
}

/// Predicted covariance `P_{k+1|k} = A P_{k|k} A^T + Q`, symmetrized.
pub fn predict_covariance(fs: &FilterState, dm: &DiscreteModel) -> Result<DMatrix<f64>> {
    if fs.p.nrows() != dm.n_states() {
        return Err(Error::Dimension(format!(
            "filter state has n = {}, model has n = {}",
            fs.p.nrows(),
            dm.n_states()
        )));
    }
    Ok(matkernel::symmetrize(
        &(dm.a() * &fs.p * dm.a().transpose() + dm.q()),
    ))
}

fn gain_with_work(p_pred: DMatrix<f64>, dm: &DiscreteModel) -> Result<(StepGains, GainWork)> {
    let c = matkernel::symmetrize(&(dm.h() * &p_pred * dm.h().transpose() + dm.r()));
    let c_inv = matkernel::spd_inverse(&c)
        .map_err(|_| Error::NotPositiveDefinite("innovation covariance".into()))?;
    let cond = matkernel::spd_condition(&c)?;
    if cond > INNOVATION_COND_WARN {
        log::warn!("innovation covariance nearly singular (condition number {cond:.3e})");
    }

    let hb = dm.h() * dm.b();
    let phc = &p_pred * dm.h().transpose() * &c_inv;
    let g = dm.b() - &phc * &hb;
    let s = matkernel::symmetrize(&(hb.transpose() * &c_inv * &hb));
    let s_inv = matkernel::spd_inverse(&s).map_err(|_| {
        Error::Infeasible(format!(
            "B^T H^T C^-1 H B is singular at the {}x{} input dimension",
            s.nrows(),
            s.ncols()
        ))
    })?;

    let l = &phc + &g * &s_inv * hb.transpose() * &c_inv;
    let m = dm.b_pinv() * &l;
    Ok((
        StepGains { l, m, c, p_pred },
        GainWork { phc, g, s_inv },
    ))
}

/// Gain computation for a given predicted covariance.
///
/// Fails with [`Error::Infeasible`] when `B^T H^T C^{-1} H B` is singular,
/// i.e. when `H B` has deficient column rank and no unbiased gain exists.
pub fn gain(p_pred: DMatrix<f64>, dm: &DiscreteModel) -> Result<StepGains> {
    gain_with_work(p_pred, dm).map(|(gains, _)| gains)
}

/// Filtered mean `A xhat + L (y - H A xhat)`.
///
/// Shared by [`update`] and the Monte Carlo fast path so both produce
/// bit-identical estimates.
pub(crate) fn filtered_mean(
    dm: &DiscreteModel,
    l: &DMatrix<f64>,
    x_hat: &DVector<f64>,
    y: &DVector<f64>,
) -> DVector<f64> {
    let x_pred = dm.a() * x_hat;
    let innovation = y - dm.h() * &x_pred;
    &x_pred + l * innovation
}

/// One measurement-driven step: absorbs `y_{k+1}` and returns the state at
/// `k + 1` together with the gains used.
///
/// The covariance update is the three-term form
///
/// ```text
/// P_{k+1|k+1} = P_pred - P_pred Ht Ci H P_pred + G S^{-1} G^T,
/// ```
///
/// symmetrized after evaluation since the expression loses symmetry in
/// floating point.
pub fn update(
    fs: &FilterState,
    y: &DVector<f64>,
    dm: &DiscreteModel,
) -> Result<(FilterState, StepGains)> {
    if y.len() != dm.n_outputs() {
        return Err(Error::Dimension(format!(
            "measurement has p = {}, model has p = {}",
            y.len(),
            dm.n_outputs()
        )));
    }
    let p_pred = predict_covariance(fs, dm)?;
    let (gains, work) = gain_with_work(p_pred, dm)?;

    let x_hat = filtered_mean(dm, &gains.l, &fs.x_hat, y);
    let p = &gains.p_pred - &work.phc * dm.h() * &gains.p_pred
        + &work.g * &work.s_inv * work.g.transpose();
    let p = matkernel::symmetrize(&p);

    Ok((
        FilterState {
            x_hat,
            p,
            k: fs.k + 1,
        },
        gains,
    ))
}
