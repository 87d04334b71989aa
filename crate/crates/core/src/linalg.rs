//! Small dense-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Rejects non-square, asymmetric, non-finite or indefinite matrices. The
/// smallest eigenvalue may dip to `-1e-8 * ||m||` to absorb rounding.
pub fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidCovariance(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCovariance("non-finite entry".into()));
    }
    let scale = max_abs(m);
    if !is_symmetric(m, 1e-12 * scale.max(1.0)) {
        return Err(Error::InvalidCovariance("matrix is not symmetric".into()));
    }
    if m.nrows() == 0 {
        return Ok(());
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-8 * scale {
        return Err(Error::InvalidCovariance(format!(
            "matrix is not positive semi-definite (smallest eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Lower Cholesky factor, or a singularity error naming `what`.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
pub fn spd_inverse_logdet(m: &DMatrix<f64>, what: &str) -> Result<(DMatrix<f64>, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((chol.inverse(), logdet))
}

/// `x^T m x` for symmetric `m`, on plain slices.
#[inline]
pub fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

/// `l * z` for lower-triangular `l`.
#[inline]
pub fn lower_mul(l: &DMatrix<f64>, z: &[f64], out: &mut [f64]) {
    let n = z.len();
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += l[(i, j)] * z[j];
        }
        out[i] = acc;
    }
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_checks() {
        assert!(check_psd(&from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]])).is_ok());
        assert!(check_psd(&from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]])).is_ok());
        assert!(matches!(
            check_psd(&from_rows(&[vec![0.0, 0.3], vec![0.3, 1.0]])),
            Err(Error::InvalidCovariance(_))
        ));
        assert!(check_psd(&from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]])).is_err());
    }

    #[test]
    fn inverse_and_logdet() {
        let m = from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
        let (inv, logdet) = spd_inverse_logdet(&m, "m").unwrap();
        assert!(((&m * &inv) - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!((logdet - 1.75f64.ln()).abs() < 1e-12);
        assert!((quad_form(&m, &[1.0, 2.0]) - (2.0 + 2.0 + 4.0)).abs() < 1e-12);
    }
}
