//! Dense linear algebra and matrix-calculus kernels.
//!
//! Everything here works on small row-major [`Matrix`] values and plain `&[f64]` vectors.
//! The symmetric eigensolver is cyclic Jacobi; linear systems go through Cholesky when the
//! matrix must be positive definite and partial-pivot LU otherwise.

mod eigen;
mod matrix;
mod solve;

use thiserror::Error;

pub use eigen::{matrix_sqrt_psd, power_method, sym_eigen, whitening_matrix, SymEigen};
pub use matrix::{dot, norm, outer, Matrix};
pub use solve::{det, inverse, solve, Cholesky, Lu};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("eigenvalue {index} is negative ({value})")]
    NegativeEigenvalue { index: usize, value: f64 },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize, last: Vec<f64> },
    #[error("zero vector")]
    ZeroVector,
    #[error("non-finite input")]
    NonFinite,
}

/// Output of [`gram_schmidt`]: one residual per input, plus dependence flags.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSchmidt {
    /// `basis[i]` is input `i` minus its projections on earlier independent residuals.
    pub basis: Vec<Vec<f64>>,
    /// `true` where the residual norm fell below the tolerance.
    pub dependent: Vec<bool>,
}

impl GramSchmidt {
    pub fn independent(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.basis.iter().zip(&self.dependent).filter(|(_, d)| !**d).map(|(b, _)| b)
    }
}

/// Classical Gram–Schmidt without normalisation.
///
/// Dependent residuals are kept in the output (they are numerically zero) but never used as
/// projectors for later vectors.
pub fn gram_schmidt(vectors: &[Vec<f64>], tol: f64) -> Result<GramSchmidt, NumericError> {
    let dim = vectors.first().map_or(0, Vec::len);
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(NumericError::DimensionMismatch(
            "vectors must share a dimension".into(),
        ));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    let mut dependent = Vec::with_capacity(vectors.len());
    for a in vectors {
        let mut u = a.clone();
        for (b, dep) in basis.iter().zip(&dependent) {
            if *dep {
                continue;
            }
            let coef = dot(b, a) / dot(b, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= coef * y);
        }
        dependent.push(norm(&u) < tol);
        basis.push(u);
    }
    Ok(GramSchmidt { basis, dependent })
}

/// Gradient of `aᵀw`.
pub fn grad_linear(a: &[f64]) -> Vec<f64> {
    a.to_vec()
}

/// Gradient of `wᵀAw`, namely `(A + Aᵀ)w`.
pub fn grad_quadratic(a: &Matrix, w: &[f64]) -> Result<Vec<f64>, NumericError> {
    a.add(&a.transpose())?.matvec(w)
}

/// Gradient of `‖w‖₂`.
pub fn grad_norm(w: &[f64]) -> Result<Vec<f64>, NumericError> {
    let n = norm(w);
    if n == 0.0 {
        return Err(NumericError::ZeroVector);
    }
    Ok(w.iter().map(|x| x / n).collect())
}

/// Gradient of `log|det W|` with respect to `W`, namely `W⁻ᵀ`.
pub fn grad_logabsdet(w: &Matrix) -> Result<Matrix, NumericError> {
    Ok(inverse(w)?.transpose())
}

/// Central-difference gradient estimate with step `h` per coordinate.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Newton direction `p` with `H p = g`; the updated point is `w - p`.
pub fn newton_step(g: &[f64], h: &Matrix) -> Result<Vec<f64>, NumericError> {
    if !h.is_symmetric(1e-9 * h.max_abs().max(1.0)) {
        return Err(NumericError::NotSymmetric);
    }
    Cholesky::new(h)?.solve(g)
}
