//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let s = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn lambda_max(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn lambda_min(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    lambda_max(&(m.transpose() * m)).max(0.0).sqrt()
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn sqrt_psd(m: &Mat) -> Mat {
    let s = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// `‖√M X‖₂²`, which equals `λ_max(XᵀMX)`.
pub fn weighted_norm_sq(m: &Mat, x: &Mat) -> f64 {
    if x.ncols() == 0 {
        return 0.0;
    }
    lambda_max(&(x.transpose() * m * x)).max(0.0)
}

pub fn require_pd(m: &Mat) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("weight is {}x{}", m.nrows(), m.ncols())));
    }
    let lmin = lambda_min(m);
    if lmin <= 0.0 {
        return Err(Error::NotPositiveDefinite(lmin));
    }
    Ok(lmin)
}

/// Largest absolute entry; zero for empty matrices.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

pub fn ones(rows: usize, cols: usize) -> Mat {
    Mat::from_element(rows, cols, 1.0)
}

/// Numerical rank by singular values relative to the largest one.
pub fn rank(m: &Mat, rtol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0_f64, |a, v| a.max(*v));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|v| **v > rtol * top).count()
}

pub fn check_shape(what: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}
