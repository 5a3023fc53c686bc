//! Dense linear-algebra helpers on top of `nalgebra`: jittered Cholesky and
//! eigenvalue-clipping repair of covariance and correlation matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::{Error, Result};

/// Eigenvalue floor used when repairing covariance and correlation matrices.
pub const EIGEN_FLOOR: f64 = 1e-8;
/// Diagonal jitter added before every Cholesky factorisation.
pub const CHOLESKY_JITTER: f64 = 1e-10;

pub fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn to_ndarray(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Raises every eigenvalue below `floor` to `target` and rebuilds the matrix.
/// Leaves the input untouched when it already satisfies the floor.
pub fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64, target: f64) -> DMatrix<f64> {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|l| if l < floor { target } else { l });
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    out
}

/// Projects a symmetric matrix onto a positive definite correlation matrix:
/// eigenvalues are clipped at [`EIGEN_FLOOR`] and the diagonal rescaled to one,
/// repeated until the floor holds after rescaling.
pub fn repair_correlation(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("correlation matrix must be square"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation matrix".into()));
    }
    let mut cur = m.clone();
    symmetrize(&mut cur);
    for _ in 0..100 {
        cur = clip_eigenvalues(&cur, EIGEN_FLOOR, EIGEN_FLOOR * 1.001);
        let d: Vec<f64> = (0..cur.nrows()).map(|i| cur[(i, i)].sqrt()).collect();
        if d.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Singular("correlation matrix has a non-positive diagonal".into()));
        }
        for i in 0..cur.nrows() {
            for j in 0..cur.ncols() {
                cur[(i, j)] = if i == j { 1.0 } else { cur[(i, j)] / (d[i] * d[j]) };
            }
        }
        if min_eigenvalue(&cur) >= EIGEN_FLOOR {
            break;
        }
    }
    Ok(cur)
}

/// Lower Cholesky factor of `m + CHOLESKY_JITTER * I`. If that still fails the
/// jitter grows tenfold, up to 1e-4.
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut jitter = CHOLESKY_JITTER;
    while jitter <= 1e-4 {
        let shifted = m + DMatrix::<f64>::identity(n, n) * jitter;
        if let Some(ch) = shifted.cholesky() {
            return Ok(ch.l());
        }
        jitter *= 10.0;
    }
    Err(Error::Singular("Cholesky factorisation failed even with jitter".into()))
}
