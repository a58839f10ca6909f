use super::{Matrix, NumericError};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Fails with `NotPositiveDefinite` when a pivot is not strictly positive.
    pub fn new(a: &Matrix) -> Result<Self, NumericError> {
        let n = a.require_square()?;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(NumericError::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, NumericError> {
        let n = self.l.rows();
        if b.len() != n {
            return Err(NumericError::DimensionMismatch(format!(
                "right-hand side has length {}, expected {n}",
                b.len()
            )));
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[(k, i)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        Ok(y)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.rows()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }
}

/// LU factorisation with partial pivoting, `P A = L U` packed into one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    /// Pivots below `1e-13 · max|A|` mark the matrix singular; `solve` then fails.
    pub fn new(a: &Matrix) -> Result<Self, NumericError> {
        let n = a.require_square()?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        let threshold = 1e-13 * a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
                .unwrap_or(k);
            if lu[(p, k)].abs() <= threshold {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            for i in (k + 1)..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Lu {
            lu,
            perm,
            sign,
            singular,
        })
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn det(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        self.sign * (0..self.lu.rows()).map(|i| self.lu[(i, i)]).product::<f64>()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, NumericError> {
        if self.singular {
            return Err(NumericError::Singular);
        }
        let n = self.lu.rows();
        if b.len() != n {
            return Err(NumericError::DimensionMismatch(format!(
                "right-hand side has length {}, expected {n}",
                b.len()
            )));
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lu[(i, k)] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.lu[(i, k)] * y[k];
            }
            y[i] /= self.lu[(i, i)];
        }
        Ok(y)
    }

    pub fn inverse(&self) -> Result<Matrix, NumericError> {
        let n = self.lu.rows();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            cols.push(self.solve(&e)?);
        }
        Matrix::from_cols(&cols)
    }
}

/// Solves `A x = b` by partial-pivot LU.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumericError> {
    Lu::new(a)?.solve(b)
}

pub fn inverse(a: &Matrix) -> Result<Matrix, NumericError> {
    Lu::new(a)?.inverse()
}

pub fn det(a: &Matrix) -> Result<f64, NumericError> {
    Ok(Lu::new(a)?.det())
}
