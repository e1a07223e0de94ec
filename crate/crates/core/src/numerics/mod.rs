//! Complex linear algebra, seeded sampling, and special functions shared by
//! every other module. Dimensions are small (`N`, `K` at most ~16), so the
//! dense routines here are hand-rolled rather than delegated to a BLAS.

mod matrix;
mod rng;
mod special;

pub use matrix::{
    cholesky, eigh, hdot, hermitian_solve, hermitian_solve_vec, norm_sq, CMat, Eigh,
    SpectralInverse,
};
pub use rng::SeededRng;
pub use special::{digamma, from_db, to_db};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix not positive definite: pivot {pivot:.3e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    DomainError(String),
}

/// Draws a circularly symmetric complex Gaussian vector with the given mean
/// and covariance. The covariance may be rank deficient (including all-zero,
/// in which case the mean is returned exactly): a Cholesky factor is used
/// when the matrix is positive definite and an eigenvalue factor with
/// negative/tiny eigenvalues clipped to zero otherwise.
pub fn sample_complex_gaussian(
    mean: &[Complex64],
    cov: &CMat,
    rng: &mut SeededRng,
) -> Result<Vec<Complex64>, NumericsError> {
    let n = mean.len();
    if cov.rows() != n || cov.cols() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "mean has {} entries but covariance is {}x{}",
            n,
            cov.rows(),
            cov.cols()
        )));
    }
    if cov.frobenius_norm() == 0.0 {
        return Ok(mean.to_vec());
    }
    // Draw the unit-variance circular normals first so the number of RNG
    // advances does not depend on which factorization succeeds.
    let unit: Vec<Complex64> = (0..n).map(|_| rng.next_complex_normal()).collect();
    let factor = match cholesky(cov) {
        Ok(l) => l,
        Err(NumericsError::NotPositiveDefinite { .. }) => {
            let eig = eigh(cov);
            let lambda_max = eig.values.iter().cloned().fold(0.0f64, f64::max);
            let cut = 1e-12 * lambda_max.max(f64::MIN_POSITIVE);
            CMat::from_fn(n, n, |i, j| {
                let lam = eig.values[j];
                if lam > cut {
                    eig.vectors.at(i, j) * lam.sqrt()
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        }
        Err(e) => return Err(e),
    };
    let noise = factor.mul_vec(&unit);
    Ok(mean
        .iter()
        .zip(noise)
        .map(|(m, e)| m + e)
        .collect())
}
