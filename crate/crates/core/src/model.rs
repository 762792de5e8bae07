// SPDX-License-Identifier: Apache-2.0

//! Continuous-time linear Gaussian system and the optomechanical instance.
//!
//! The model is
//!
//! ```text
//! dx/dt = A0 x + B0 f + xi,    y = H0 x + eta,
//! ```
//!
//! with white noises of intensity `E[xi xi^T] = Q0 delta`, `E[eta eta^T] =
//! R0 delta`. The continuous noise processes have no sample-path
//! representation here; they enter only through their intensities and the
//! discretized covariances.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matkernel;

/// Physical parameters of the optomechanical force sensor.
///
/// Units are carried in documentation only: mass in kg, resonant frequency in
/// rad/s. The noise intensity is the bare momentum-kick power per unit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptoParams {
    pub mass: f64,
    pub omega_m: f64,
    pub noise_intensity: f64,
}

/// Continuous-time linear Gaussian system `(A0, B0, H0, Q0, R0)`.
///
/// Dimensions are generic even though the optomechanical instance fixes
/// `(n, m, p) = (2, 1, 1)`; the filter and estimator formulas downstream are
/// dimension-generic.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel {
    a0: DMatrix<f64>,
    b0: DMatrix<f64>,
    h0: DMatrix<f64>,
    q0: DMatrix<f64>,
    r0: DMatrix<f64>,
}

/// A violated invariant reported by [`ContinuousModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Q0NotSymmetricPsd { min_eigenvalue: f64 },
    R0NotPositiveDefinite,
    B0RankDeficient,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Q0NotSymmetricPsd { min_eigenvalue } => {
                write!(f, "Q0 not symmetric positive semi-definite (min eigenvalue {min_eigenvalue:.3e})")
            }
            Violation::R0NotPositiveDefinite => write!(f, "R0 not positive definite"),
            Violation::B0RankDeficient => write!(f, "B0 rank-deficient"),
        }
    }
}

impl ContinuousModel {
    /// Builds a model from its five matrices, checking dimensions and
    /// finiteness. Invariant violations (definiteness, rank) are reported by
    /// [`validate`](Self::validate), not here.
    pub fn new(
        a0: DMatrix<f64>,
        b0: DMatrix<f64>,
        h0: DMatrix<f64>,
        q0: DMatrix<f64>,
        r0: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a0.nrows();
        if n == 0 || a0.ncols() != n {
            return Err(Error::Dimension("A0 must be square with n > 0".into()));
        }
        if b0.nrows() != n || b0.ncols() == 0 {
            return Err(Error::Dimension("B0 must be n x m with m > 0".into()));
        }
        if h0.ncols() != n || h0.nrows() == 0 {
            return Err(Error::Dimension("H0 must be p x n with p > 0".into()));
        }
        if q0.nrows() != n || q0.ncols() != n {
            return Err(Error::Dimension("Q0 must be n x n".into()));
        }
        let p = h0.nrows();
        if r0.nrows() != p || r0.ncols() != p {
            return Err(Error::Dimension("R0 must be p x p".into()));
        }
        for (m, what) in [(&a0, "A0"), (&b0, "B0"), (&h0, "H0"), (&q0, "Q0"), (&r0, "R0")] {
            matkernel::ensure_finite(m, what)?;
        }
        Ok(Self { a0, b0, h0, q0, r0 })
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }
    pub fn b0(&self) -> &DMatrix<f64> {
        &self.b0
    }
    pub fn h0(&self) -> &DMatrix<f64> {
        &self.h0
    }
    pub fn q0(&self) -> &DMatrix<f64> {
        &self.q0
    }
    pub fn r0(&self) -> &DMatrix<f64> {
        &self.r0
    }

    /// State dimension n.
    pub fn n_states(&self) -> usize {
        self.a0.nrows()
    }
    /// Input dimension m.
    pub fn n_inputs(&self) -> usize {
        self.b0.ncols()
    }
    /// Output dimension p.
    pub fn n_outputs(&self) -> usize {
        self.h0.nrows()
    }

    /// Reports every violated model invariant; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        match matkernel::psd_check(&self.q0, 1e-12) {
            Ok(report) if report.is_psd => {}
            Ok(report) => violations.push(Violation::Q0NotSymmetricPsd {
                min_eigenvalue: report.min_eigenvalue,
            }),
            Err(_) => violations.push(Violation::Q0NotSymmetricPsd {
                min_eigenvalue: f64::NAN,
            }),
        }
        if matkernel::spd_inverse(&self.r0).is_err() {
            violations.push(Violation::R0NotPositiveDefinite);
        }
        if !matkernel::has_full_column_rank(&self.b0) {
            violations.push(Violation::B0RankDeficient);
        }
        violations
    }

    /// Like [`validate`](Self::validate) but collapses violations into an
    /// error listing all of them.
    pub fn validated(self) -> Result<Self> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::Config(list.join("; ")))
        }
    }
}

/// Builds the two-dimensional optomechanical model
///
/// ```text
/// A0 = [[0, 1/m], [-m w^2, 0]],  B0 = [0; 1],  H0 = [1, 0],
/// Q0 = diag(0, D),               R0 = [D].
/// ```
pub fn build_optomechanical(params: &OptoParams) -> Result<ContinuousModel> {
    if !(params.mass > 0.0 && params.mass.is_finite()) {
        return Err(Error::Domain(format!("mass must be positive, got {}", params.mass)));
    }
    if !(params.omega_m > 0.0 && params.omega_m.is_finite()) {
        return Err(Error::Domain(format!(
            "resonant frequency must be positive, got {}",
            params.omega_m
        )));
    }
    if !(params.noise_intensity > 0.0 && params.noise_intensity.is_finite()) {
        return Err(Error::Domain(format!(
            "noise intensity must be positive, got {}",
            params.noise_intensity
        )));
    }
    let m = params.mass;
    let w = params.omega_m;
    let d = params.noise_intensity;
    ContinuousModel::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0 / m, -m * w * w, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, d]),
        DMatrix::from_row_slice(1, 1, &[d]),
    )
}
