use super::{dot, norm, Matrix, NumericError};

const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-9;
const NEGATIVE_EIGENVALUE_TOL: f64 = -1e-9;

/// `C = E diag(values) Eᵀ`, eigenvalues descending, eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn reconstruct(&self) -> Matrix {
        let scaled = self
            .vectors
            .matmul(&Matrix::diag(&self.values))
            .expect("square factors");
        scaled.matmul(&self.vectors.transpose()).expect("square factors")
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Each eigenvector's largest-magnitude component is positive (first such index on ties).
pub fn sym_eigen(c: &Matrix) -> Result<SymEigen, NumericError> {
    let n = c.require_square()?;
    let scale = c.max_abs().max(1.0);
    if !c.is_symmetric(SYMMETRY_TOL * scale) {
        return Err(NumericError::NotSymmetric);
    }
    if !c.is_finite() {
        return Err(NumericError::NonFinite);
    }
    let mut a = c.clone();
    let mut v = Matrix::identity(n);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= OFF_DIAGONAL_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cs * akp - sn * akq;
                    a[(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cs * apk - sn * aqk;
                    a[(q, k)] = sn * apk + cs * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cs * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(NumericError::NoConvergence {
            iterations: MAX_SWEEPS,
            last: (0..n).map(|i| a[(i, i)]).collect(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let cols: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let mut col = v.col(i);
            fix_sign(&mut col);
            col
        })
        .collect();
    Ok(SymEigen {
        values,
        vectors: Matrix::from_cols(&cols)?,
    })
}

pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn psd_eigen(c: &Matrix) -> Result<SymEigen, NumericError> {
    let mut eig = sym_eigen(c)?;
    let scale = c.max_abs().max(1.0);
    for (i, l) in eig.values.iter_mut().enumerate() {
        if *l < NEGATIVE_EIGENVALUE_TOL * scale {
            return Err(NumericError::NegativeEigenvalue { index: i, value: *l });
        }
        *l = l.max(0.0);
    }
    Ok(eig)
}

/// Symmetric square root `M = E diag(√λ) Eᵀ`, so `M M = C`.
pub fn matrix_sqrt_psd(c: &Matrix) -> Result<Matrix, NumericError> {
    let eig = psd_eigen(c)?;
    let roots: Vec<f64> = eig.values.iter().map(|l| l.sqrt()).collect();
    let m = eig.vectors.matmul(&Matrix::diag(&roots))?;
    m.matmul(&eig.vectors.transpose())
}

/// Whitening matrix `V = diag(λ^{-1/2}) Eᵀ`, so `V C Vᵀ = I`. Requires `C` positive definite.
pub fn whitening_matrix(c: &Matrix) -> Result<Matrix, NumericError> {
    let eig = psd_eigen(c)?;
    if eig.values.iter().any(|l| *l <= 0.0) {
        return Err(NumericError::Singular);
    }
    let inv_roots: Vec<f64> = eig.values.iter().map(|l| 1.0 / l.sqrt()).collect();
    Matrix::diag(&inv_roots).matmul(&eig.vectors.transpose())
}

/// Dominant eigenpair by repeated multiplication and renormalisation.
///
/// Stops once successive iterates agree up to sign within `tol`; the eigenvalue is the
/// Rayleigh quotient of the final iterate.
pub fn power_method(
    sigma: &Matrix,
    w0: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<f64>, f64), NumericError> {
    sigma.require_square()?;
    if w0.len() != sigma.rows() {
        return Err(NumericError::DimensionMismatch(format!(
            "start vector has length {}, matrix is {}x{}",
            w0.len(),
            sigma.rows(),
            sigma.cols()
        )));
    }
    let n0 = norm(w0);
    if n0 == 0.0 {
        return Err(NumericError::ZeroVector);
    }
    let mut w: Vec<f64> = w0.iter().map(|x| x / n0).collect();
    for _ in 0..max_iters {
        let v = sigma.matvec(&w)?;
        let nv = norm(&v);
        if nv == 0.0 {
            return Err(NumericError::ZeroVector);
        }
        let next: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let same: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let flipped: f64 = next.iter().zip(&w).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        w = next;
        if same < tol || flipped < tol {
            let lambda = dot(&w, &sigma.matvec(&w)?);
            return Ok((w, lambda));
        }
    }
    Err(NumericError::NoConvergence {
        iterations: max_iters,
        last: w,
    })
}
