// SPDX-License-Identifier: Apache-2.0

//! Zero-order-hold discretization of the continuous model.
//!
//! For a sampling period `dt` the discrete system is
//!
//! ```text
//! A = e^{A0 dt},  B = int_0^dt e^{A0 tau} dtau B0,  H = H0,
//! Q = int_0^dt e^{A0 tau} Q0 e^{A0^T tau} dtau,     R = R0 / dt.
//! ```
//!
//! The two integrals are evaluated by exponentials of augmented block
//! matrices (Van Loan's method) rather than quadrature: one algorithm,
//! machine-precision accuracy, no step-size tuning. Note that the benchmark
//! scenario has `w dt = 17.6`, so nothing here may assume slow dynamics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matkernel;
use crate::model::ContinuousModel;

/// Discrete-time system `(A, B, H, Q, R)` with its sampling period.
///
/// Construction verifies that `B` and `H*B` have full column rank; the latter
/// is what makes the unbiased gain of the filter well defined. The
/// pseudo-inverse of `B` is computed once and cached.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    h: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    dt: f64,
    b_pinv: DMatrix<f64>,
}

impl DiscreteModel {
    /// Assembles and validates a discrete model from its matrices.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension("A must be square with n > 0".into()));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension("B must be n x m with m > 0".into()));
        }
        if h.ncols() != n || h.nrows() == 0 {
            return Err(Error::Dimension("H must be p x n with p > 0".into()));
        }
        if q.shape() != (n, n) {
            return Err(Error::Dimension("Q must be n x n".into()));
        }
        let p = h.nrows();
        if r.shape() != (p, p) {
            return Err(Error::Dimension("R must be p x p".into()));
        }
        for (m, what) in [(&a, "A"), (&b, "B"), (&h, "H"), (&q, "Q"), (&r, "R")] {
            matkernel::ensure_finite(m, what)?;
        }
        let psd = matkernel::psd_check(&q, 1e-12)?;
        if !psd.is_psd {
            return Err(Error::NotPositiveSemiDefinite("Q".into(), psd.min_eigenvalue));
        }
        matkernel::spd_inverse(&r).map_err(|_| Error::NotPositiveDefinite("R".into()))?;

        let b_pinv = matkernel::pinv(&b)
            .map_err(|_| Error::RankDeficient("B does not have full column rank".into()))?;
        let hb = &h * &b;
        if !matkernel::has_full_column_rank(&hb) {
            return Err(Error::Infeasible(format!(
                "H*B is {}x{} with column rank below {}",
                hb.nrows(),
                hb.ncols(),
                hb.ncols()
            )));
        }
        Ok(Self { a, b, h, q, r, dt, b_pinv })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Cached `B^+ = (B^T B)^{-1} B^T`.
    pub fn b_pinv(&self) -> &DMatrix<f64> {
        &self.b_pinv
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.h.nrows()
    }
}

/// Evaluates the three zero-order-hold blocks by augmented exponentials.
///
/// `A` and `B` come from `exp([[A0, B0], [0, 0]] dt)`; `Q` is recovered from
/// `exp([[-A0, Q0], [0, A0^T]] dt)` as the product of the transposed
/// lower-right block with the upper-right block. The returned `Q` is the raw
/// product, symmetric only up to rounding.
pub fn van_loan_blocks(
    a0: &DMatrix<f64>,
    b0: &DMatrix<f64>,
    q0: &DMatrix<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = a0.nrows();
    let m = b0.ncols();
    if a0.ncols() != n || b0.nrows() != n || q0.shape() != (n, n) {
        return Err(Error::Dimension(
            "van_loan_blocks requires A0 n x n, B0 n x m, Q0 n x n".into(),
        ));
    }

    // [[A0, B0], [0, 0]] * dt; top row of the exponential is [A, B].
    let mut aug_input = DMatrix::<f64>::zeros(n + m, n + m);
    aug_input.view_mut((0, 0), (n, n)).copy_from(&(a0 * dt));
    aug_input.view_mut((0, n), (n, m)).copy_from(&(b0 * dt));
    let exp_input = matkernel::mat_exp(&aug_input)?;
    let a = exp_input.view((0, 0), (n, n)).into_owned();
    let b = exp_input.view((0, n), (n, m)).into_owned();

    // [[-A0, Q0], [0, A0^T]] * dt; Q = F22^T * F12.
    let mut aug_noise = DMatrix::<f64>::zeros(2 * n, 2 * n);
    aug_noise.view_mut((0, 0), (n, n)).copy_from(&(-(a0 * dt)));
    aug_noise.view_mut((0, n), (n, n)).copy_from(&(q0 * dt));
    aug_noise
        .view_mut((n, n), (n, n))
        .copy_from(&(a0.transpose() * dt));
    let exp_noise = matkernel::mat_exp(&aug_noise)?;
    let f12 = exp_noise.view((0, n), (n, n)).into_owned();
    let f22 = exp_noise.view((n, n), (n, n)).into_owned();
    let q = f22.transpose() * f12;

    Ok((a, b, q))
}

/// Discretizes `cm` under zero-order hold with sampling period `dt`.
///
/// `H` is copied, `R = R0 / dt` exactly, and `Q` is explicitly symmetrized to
/// remove floating-point asymmetry before the PSD check. Fails with
/// [`Error::Infeasible`] when `H*B` loses column rank, since the unbiased
/// filter gain then does not exist.
pub fn discretize(cm: &ContinuousModel, dt: f64) -> Result<DiscreteModel> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let (a, b, q) = van_loan_blocks(cm.a0(), cm.b0(), cm.q0(), dt)?;
    let q = matkernel::symmetrize(&q);
    let r = cm.r0() / dt;
    DiscreteModel::new(a, b, cm.h0().clone(), q, r, dt)
}
