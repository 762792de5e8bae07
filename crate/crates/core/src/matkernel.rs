// SPDX-License-Identifier: Apache-2.0

//! Small dense real-matrix kernel.
//!
//! Exactly the operations the rest of the crate needs: checked construction,
//! matrix exponential, Moore-Penrose pseudo-inverse of full-column-rank
//! matrices, inverse of small SPD matrices, and PSD diagnostics. Matrices are
//! `nalgebra::DMatrix<f64>`; everything here is sized for the n <= 32 regime
//! and makes no attempt at BLAS-level performance.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Rank tolerance factor for the pseudo-inverse: the smallest eigenvalue of
/// `B^T B` must exceed `RANK_TOL_FACTOR * eps * ||B^T B||`.
pub const RANK_TOL_FACTOR: f64 = 1e3;

/// Relative asymmetry beyond which a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Builds a matrix from row slices, validating shape and finiteness.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Dimension("matrix must have positive dimensions".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("matrix rows have unequal lengths".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entries must be finite".into()));
    }
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

/// Maximum absolute column sum.
pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

fn ensure_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} requires a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

// Padé coefficient tables and order thresholds from Higham, "The Scaling and
// Squaring Method for the Matrix Exponential Revisited" (2005).
#[allow(clippy::excessive_precision)]
const THETA_3: f64 = 1.495585217958292e-2;
#[allow(clippy::excessive_precision)]
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential `e^M` by scaling-and-squaring with diagonal Padé
/// approximants of orders 3/5/7/9/13.
///
/// Order and scaling are chosen from `d_k = ||M^k||^{1/k}` of explicitly
/// computed even powers rather than from `||M||` alone; for non-normal
/// matrices (the oscillator drift mixes entries across four orders of
/// magnitude) this avoids an order of magnitude of needless squarings and
/// the rounding they amplify. Exact identity for the zero matrix. Errors on
/// non-square or non-finite input.
pub fn mat_exp(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(m, "mat_exp")?;
    ensure_finite(m, "mat_exp input")?;
    let n = m.nrows();
    if n == 1 {
        return Ok(DMatrix::from_element(1, 1, m[(0, 0)].exp()));
    }

    let m2 = m * m;
    let m4 = &m2 * &m2;
    let m6 = &m2 * &m4;
    let d4 = one_norm(&m4).powf(0.25);
    let d6 = one_norm(&m6).powf(1.0 / 6.0);

    if d4.max(d6) <= THETA_3 {
        return pade_low(m, &PADE_3);
    }
    if d4.max(d6) <= THETA_5 {
        return pade_low(m, &PADE_5);
    }
    let m8 = &m4 * &m4;
    let d8 = one_norm(&m8).powf(0.125);
    let eta3 = d6.max(d8);
    if eta3 <= THETA_7 {
        return pade_low(m, &PADE_7);
    }
    if eta3 <= THETA_9 {
        return pade_low(m, &PADE_9);
    }

    let d10 = one_norm(&(&m4 * &m6)).powf(0.1);
    let eta = eta3.min(d8.max(d10));
    let s = ((eta / THETA_13).log2().ceil() as i32).max(0);
    let scaled = m / 2f64.powi(s);
    let mut result = pade_13(&scaled)?;
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}

/// Diagonal Padé approximant of order <= 9, coefficient table in `b`.
fn pade_low(m: &DMatrix<f64>, b: &[f64]) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);

    // Powers m^2, m^4, ... as needed by the even/odd coefficient split.
    let mut even_pows = vec![eye.clone()];
    let m2 = m * m;
    let n_pows = (b.len() - 1) / 2;
    for _ in 0..n_pows {
        let next = even_pows.last().unwrap() * &m2;
        even_pows.push(next);
    }

    let mut u_inner = DMatrix::<f64>::zeros(n, n);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for (i, pow) in even_pows.iter().enumerate() {
        if 2 * i + 1 < b.len() {
            u_inner += pow * b[2 * i + 1];
        }
        v += pow * b[2 * i];
    }
    let u = m * u_inner;
    pade_solve(u, v)
}

/// Order-13 Padé approximant in the factored form that avoids powers above
/// `m^6`.
fn pade_13(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let b = &PADE_13;
    let eye = DMatrix::<f64>::identity(n, n);
    let m2 = m * m;
    let m4 = &m2 * &m2;
    let m6 = &m2 * &m4;

    let w1 = &m6 * b[13] + &m4 * b[11] + &m2 * b[9];
    let w2 = &w1 * &m6 + &m6 * b[7] + &m4 * b[5] + &m2 * b[3] + &eye * b[1];
    let u = m * w2;

    let v1 = &m6 * b[12] + &m4 * b[10] + &m2 * b[8];
    let v = &v1 * &m6 + &m6 * b[6] + &m4 * b[4] + &m2 * b[2] + &eye * b[0];

    pade_solve(u, v)
}

/// Solves `(V - U) X = (V + U)` for the rational approximant value.
fn pade_solve(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let numer = &v + &u;
    let denom = v - u;
    denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Domain("matrix exponential: Padé denominator singular".into()))
}

/// Moore-Penrose pseudo-inverse for the tall full-column-rank case:
/// `B^+ = (B^T B)^{-1} B^T`.
///
/// Errors with [`Error::RankDeficient`] when the smallest eigenvalue of
/// `B^T B` falls below `RANK_TOL_FACTOR * eps * ||B^T B||`.
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(m, "pinv input")?;
    if m.nrows() < m.ncols() {
        return Err(Error::RankDeficient(format!(
            "pinv: {}x{} matrix cannot have full column rank",
            m.nrows(),
            m.ncols()
        )));
    }
    let gram = symmetrize(&(m.transpose() * m));
    let eig = SymmetricEigen::new(gram.clone());
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min_eig <= RANK_TOL_FACTOR * f64::EPSILON * max_eig {
        return Err(Error::RankDeficient(format!(
            "pinv: smallest eigenvalue of B^T B is {min_eig:.3e}"
        )));
    }
    Ok(spd_inverse(&gram)? * m.transpose())
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
///
/// Rejects inputs whose asymmetry exceeds [`SYMMETRY_TOL`] relative to the
/// 1-norm, and inputs whose Cholesky factorization fails.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(m, "spd_inverse")?;
    ensure_finite(m, "spd_inverse input")?;
    let asym = one_norm(&(m - m.transpose()));
    if asym > SYMMETRY_TOL * one_norm(m) {
        return Err(Error::NotSymmetric(format!(
            "spd_inverse: ||M - M^T|| = {asym:.3e}"
        )));
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("spd_inverse input".into()))?;
    Ok(chol.inverse())
}

/// Outcome of a positive semi-definiteness diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    /// Whether the smallest eigenvalue clears `-tol * ||M||`.
    pub is_psd: bool,
    /// Smallest eigenvalue of the symmetrized input.
    pub min_eigenvalue: f64,
}

/// Reports whether `M` is positive semi-definite within `tol`.
///
/// The input is symmetrized before the eigenvalue computation; this is a
/// diagnostic and only errors on non-square or non-finite input.
pub fn psd_check(m: &DMatrix<f64>, tol: f64) -> Result<PsdReport> {
    ensure_square(m, "psd_check")?;
    ensure_finite(m, "psd_check input")?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min_eigenvalue = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    Ok(PsdReport {
        is_psd: min_eigenvalue >= -tol * max_eig,
        min_eigenvalue,
    })
}

/// True when the (tall or square) matrix has full column rank under the same
/// tolerance used by [`pinv`].
pub fn has_full_column_rank(m: &DMatrix<f64>) -> bool {
    if m.nrows() < m.ncols() {
        return false;
    }
    let gram = symmetrize(&(m.transpose() * m));
    let eig = SymmetricEigen::new(gram);
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    min_eig > RANK_TOL_FACTOR * f64::EPSILON * max_eig
}

/// Spectral condition number of a symmetric PD matrix; `f64::INFINITY` when
/// the smallest eigenvalue is not positive.
pub fn spd_condition(m: &DMatrix<f64>) -> Result<f64> {
    ensure_square(m, "spd_condition")?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min_eig <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(max_eig / min_eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Harmonic-oscillator parameters of the optomechanical benchmark.
    const MASS: f64 = 5.88e-4;
    const OMEGA: f64 = 1.76e5;
    const DT: f64 = 1e-4;

    fn oscillator_drift() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0 / MASS, -MASS * OMEGA * OMEGA, 0.0])
    }

    fn max_rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let scale = one_norm(b).max(f64::MIN_POSITIVE);
        one_norm(&(a - b)) / scale
    }

    /// Plain truncated power series; independent oracle for small-norm inputs.
    fn taylor_exp(m: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
        let n = m.nrows();
        let mut acc = DMatrix::<f64>::identity(n, n);
        let mut term = DMatrix::<f64>::identity(n, n);
        for j in 1..=terms {
            term = &term * m / (j as f64);
            acc += &term;
        }
        acc
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(2, 2);
        let e = mat_exp(&z).unwrap();
        assert_eq!(e, DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn exp_of_diagonal() {
        let d = DMatrix::from_row_slice(2, 2, &[2f64.ln(), 0.0, 0.0, 3f64.ln()]);
        let e = mat_exp(&d).unwrap();
        assert_relative_eq!(e[(0, 0)], 2.0, max_relative = 1e-14);
        assert_relative_eq!(e[(1, 1)], 3.0, max_relative = 1e-14);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    #[allow(clippy::excessive_precision)] // frozen 17-digit oracle values
    fn exp_of_oscillator_matches_closed_form() {
        // e^{A0 t} = cos(wt) I + sin(wt)/w A0 since A0^2 = -w^2 I. Frozen
        // values computed from the closed form at 50-digit precision.
        let e = mat_exp(&(oscillator_drift() * DT)).unwrap();
        let theta = OMEGA * DT;
        let expected = DMatrix::from_row_slice(
            2,
            2,
            &[
                theta.cos(),
                theta.sin() / (MASS * OMEGA),
                -MASS * OMEGA * theta.sin(),
                theta.cos(),
            ],
        );
        assert!(max_rel_err(&e, &expected) < 1e-12);
        assert_relative_eq!(e[(0, 0)], 0.31574375491924198, max_relative = 1e-12);
        assert_relative_eq!(e[(0, 1)], -0.0091686427210703119, max_relative = 1e-12);
        assert_relative_eq!(e[(1, 0)], 98.194019400550862, max_relative = 1e-12);
        assert_relative_eq!(e[(1, 1)], 0.31574375491924198, max_relative = 1e-12);
    }

    #[test]
    fn exp_matches_taylor_series_for_moderate_norms() {
        // 50-term series is exact to machine precision for ||M|| <= 2.
        let m = DMatrix::from_row_slice(3, 3, &[0.3, -0.5, 0.1, 0.7, 0.2, -0.4, 0.0, 0.6, -0.1]);
        let e = mat_exp(&m).unwrap();
        let series = taylor_exp(&m, 50);
        assert!(max_rel_err(&e, &series) < 1e-14);
    }

    #[test]
    fn exp_inverse_identity() {
        let a = oscillator_drift() * DT;
        let prod = mat_exp(&a).unwrap() * mat_exp(&(-&a)).unwrap();
        assert!(max_rel_err(&prod, &DMatrix::identity(2, 2)) < 1e-10);
    }

    #[test]
    fn exp_determinant_is_exp_trace() {
        // Jacobi's formula; the oscillator drift is trace-free so det = 1.
        let e = mat_exp(&(oscillator_drift() * DT)).unwrap();
        assert_relative_eq!(e.determinant(), 1.0, max_relative = 1e-12);

        let m = DMatrix::from_row_slice(2, 2, &[0.4, 1.2, -0.3, -0.9]);
        let e = mat_exp(&m).unwrap();
        assert_relative_eq!(e.determinant(), m.trace().exp(), max_relative = 1e-10);
    }

    #[test]
    fn exp_rejects_non_square() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(mat_exp(&m), Err(Error::Dimension(_))));
    }

    #[test]
    fn pinv_scalar_and_unit_column() {
        let p = pinv(&DMatrix::from_row_slice(1, 1, &[2.0])).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.5, max_relative = 1e-15);

        let p = pinv(&DMatrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        assert_eq!(p.shape(), (1, 2));
        assert_eq!(p[(0, 0)], 0.0);
        assert_relative_eq!(p[(0, 1)], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn pinv_of_discretized_oscillator_input() {
        // B = [(1-cos wt)/(m w^2), sin(wt)/w]^T from the zero-order-hold
        // integral; B^+ = [b1, b2] / (b1^2 + b2^2). Frozen values from the
        // closed form at 50-digit precision.
        let theta = OMEGA * DT;
        let b1 = (1.0 - theta.cos()) / (MASS * OMEGA * OMEGA);
        let b2 = theta.sin() / OMEGA;
        let b = DMatrix::from_row_slice(2, 1, &[b1, b2]);
        let p = pinv(&b).unwrap();
        let den = b1 * b1 + b2 * b2;
        assert_relative_eq!(p[(0, 0)], b1 / den, max_relative = 1e-12);
        assert_relative_eq!(p[(0, 1)], b2 / den, max_relative = 1e-12);
        assert_relative_eq!(p[(0, 0)], 1292.499156358476, max_relative = 1e-12);
        assert_relative_eq!(p[(0, 1)], -185479.76455761955, max_relative = 1e-12);

        let prod = &p * &b;
        assert!((prod[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_rejects_rank_deficient() {
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 0.0]);
        assert!(matches!(pinv(&b), Err(Error::RankDeficient(_))));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(pinv(&b), Err(Error::RankDeficient(_))));
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(matches!(pinv(&b), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn spd_inverse_basics() {
        let inv = spd_inverse(&DMatrix::from_row_slice(1, 1, &[4.0])).unwrap();
        assert_relative_eq!(inv[(0, 0)], 0.25, max_relative = 1e-15);

        let eye = DMatrix::<f64>::identity(3, 3);
        assert!(max_rel_err(&spd_inverse(&eye).unwrap(), &eye) < 1e-15);

        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]);
        let inv = spd_inverse(&d).unwrap();
        assert_relative_eq!(inv[(0, 0)], 0.5, max_relative = 1e-15);
        assert_relative_eq!(inv[(1, 1)], 0.125, max_relative = 1e-15);

        let prod = &d * &inv;
        assert!(max_rel_err(&prod, &DMatrix::identity(2, 2)) < 1e-10);
    }

    #[test]
    fn spd_inverse_rejects_bad_inputs() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(spd_inverse(&asym), Err(Error::NotSymmetric(_))));

        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            spd_inverse(&indef),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn psd_check_reports() {
        let r = psd_check(&DMatrix::identity(3, 3), 1e-12).unwrap();
        assert!(r.is_psd);
        assert_relative_eq!(r.min_eigenvalue, 1.0, max_relative = 1e-12);

        let r = psd_check(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), 1e-12).unwrap();
        assert!(!r.is_psd);
        assert_relative_eq!(r.min_eigenvalue, -1.0, max_relative = 1e-12);
    }

    #[test]
    fn matrix_from_rows_validates() {
        assert!(matrix_from_rows(&[]).is_err());
        assert!(matrix_from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(matrix_from_rows(&[vec![f64::NAN]]).is_err());
        let m = matrix_from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn small_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
            proptest::collection::vec(-0.5f64..0.5, n * n)
                .prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
        }

        proptest! {
            #[test]
            fn exp_matches_series(m in small_matrix(3)) {
                let e = mat_exp(&m).unwrap();
                let series = taylor_exp(&m, 50);
                prop_assert!(max_rel_err(&e, &series) < 1e-12);
            }

            #[test]
            fn exp_times_exp_of_negation_is_identity(m in small_matrix(4)) {
                let prod = mat_exp(&m).unwrap() * mat_exp(&(-&m)).unwrap();
                prop_assert!(max_rel_err(&prod, &DMatrix::identity(4, 4)) < 1e-10);
            }

            #[test]
            fn spd_inverse_is_involutive(v in proptest::collection::vec(-1.0f64..1.0, 9)) {
                let g = DMatrix::from_row_slice(3, 3, &v);
                let spd = &g * g.transpose() + DMatrix::<f64>::identity(3, 3) * 0.1;
                let twice = spd_inverse(&spd_inverse(&spd).unwrap()).unwrap();
                prop_assert!(max_rel_err(&twice, &spd) < 1e-9);
            }

            #[test]
            fn pinv_is_left_inverse(v in proptest::collection::vec(-2.0f64..2.0, 6)) {
                let b = DMatrix::from_row_slice(3, 2, &v);
                if has_full_column_rank(&b) {
                    let prod = pinv(&b).unwrap() * &b;
                    prop_assert!(max_rel_err(&prod, &DMatrix::identity(2, 2)) < 1e-9);
                }
            }
        }
    }
}
