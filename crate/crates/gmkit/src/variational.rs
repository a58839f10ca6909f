//! Mean-field variational inference for Gaussian targets.
//!
//! The target is `log p(y) = −½ yᵀΛy + ηᵀy + const` and the approximation is a product of
//! independent Gaussians `q(y) = Π_i N(y_i; m_i, s_i²)`.

use thiserror::Error;

use crate::numerics::{Cholesky, Matrix, NumericError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coordinate {index} is out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("diagonal precision entry {index} is {value}, must be positive")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("variance {index} is {value}, must be positive and finite")]
    InvalidVariance { index: usize, value: f64 },
    #[error("visiting order is not a permutation of the coordinates")]
    InvalidOrder,
    #[error("at least one {0} is required")]
    Empty(&'static str),
    #[error("no convergence after {sweeps} sweeps (last mean change {last_change})")]
    NoConvergence {
        sweeps: usize,
        last_change: f64,
        state: MeanFieldState,
    },
}

type Result<T> = std::result::Result<T, VariationalError>;

/// Quadratic log density with symmetric positive-definite precision.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    precision: Matrix,
    linear: Vec<f64>,
}

impl GaussianTarget {
    pub fn new(precision: Matrix, linear: Vec<f64>) -> Result<Self> {
        if !precision.is_square() || precision.rows() != linear.len() {
            return Err(VariationalError::DimensionMismatch(format!(
                "precision is {}×{}, linear term has {}",
                precision.rows(),
                precision.cols(),
                linear.len()
            )));
        }
        if !linear.iter().all(|x| x.is_finite()) {
            return Err(NumericError::NonFinite.into());
        }
        if !precision.is_symmetric(1e-12 * precision.max_abs().max(1.0)) {
            return Err(NumericError::NotSymmetric.into());
        }
        Cholesky::new(&precision)?;
        Ok(GaussianTarget { precision, linear })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Exact posterior mean `Λ⁻¹η`.
    pub fn mean(&self) -> Result<Vec<f64>> {
        Ok(Cholesky::new(&self.precision)?.solve(&self.linear)?)
    }
}

/// Means and variances of the factorised approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl MeanFieldState {
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(VariationalError::DimensionMismatch(format!(
                "{} means, {} variances",
                means.len(),
                variances.len()
            )));
        }
        if let Some((index, &value)) = variances.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(VariationalError::InvalidVariance { index, value });
        }
        Ok(MeanFieldState { means, variances })
    }

    /// Unit variances at the given means.
    pub fn at(means: Vec<f64>) -> Self {
        let variances = vec![1.0; means.len()];
        MeanFieldState { means, variances }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }
}

fn check_dims(target: &GaussianTarget, state: &MeanFieldState) -> Result<()> {
    if target.dim() != state.dim() {
        return Err(VariationalError::DimensionMismatch(format!(
            "target has dimension {}, state {}",
            target.dim(),
            state.dim()
        )));
    }
    Ok(())
}

/// Sets `q_i` to the Gaussian proportional to `exp(E_{q_{−i}}[log p])`; other coordinates are untouched.
pub fn mf_update(target: &GaussianTarget, state: &MeanFieldState, i: usize) -> Result<MeanFieldState> {
    check_dims(target, state)?;
    if i >= target.dim() {
        return Err(VariationalError::IndexOutOfRange { index: i, dim: target.dim() });
    }
    let lam = &target.precision;
    let lii = lam[(i, i)];
    if !(lii > 0.0) {
        return Err(VariationalError::NonPositiveDiagonal { index: i, value: lii });
    }
    let coupling: f64 = (0..target.dim()).filter(|&j| j != i).map(|j| lam[(i, j)] * state.means[j]).sum();
    let mut next = state.clone();
    next.means[i] = (target.linear[i] - coupling) / lii;
    next.variances[i] = 1.0 / lii;
    Ok(next)
}

/// Cyclic coordinate ascent in index order until the largest mean change in a sweep is below `tol`.
pub fn mean_field_solve(target: &GaussianTarget, init: &MeanFieldState, sweeps: usize, tol: f64) -> Result<MeanFieldState> {
    let order: Vec<usize> = (0..target.dim()).collect();
    mean_field_solve_ordered(target, init, sweeps, tol, &order)
}

/// As [`mean_field_solve`] with an explicit coordinate visiting order.
pub fn mean_field_solve_ordered(
    target: &GaussianTarget,
    init: &MeanFieldState,
    sweeps: usize,
    tol: f64,
    order: &[usize],
) -> Result<MeanFieldState> {
    check_dims(target, init)?;
    if sweeps == 0 {
        return Err(VariationalError::Empty("sweep"));
    }
    let mut seen = vec![false; target.dim()];
    for &i in order {
        if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
            return Err(VariationalError::InvalidOrder);
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(VariationalError::InvalidOrder);
    }
    let mut state = init.clone();
    let mut change = f64::INFINITY;
    for _ in 0..sweeps {
        change = 0.0;
        for &i in order {
            let next = mf_update(target, &state, i)?;
            change = change.max((next.means[i] - state.means[i]).abs());
            state = next;
        }
        if change < tol {
            return Ok(state);
        }
    }
    Err(VariationalError::NoConvergence {
        sweeps,
        last_change: change,
        state,
    })
}

/// `E_q[log p] + H[q]`, omitting the target's log normaliser.
pub fn elbo(target: &GaussianTarget, state: &MeanFieldState) -> Result<f64> {
    check_dims(target, state)?;
    let lam = &target.precision;
    let m = &state.means;
    let quad: f64 = lam.matvec(m)?.iter().zip(m).map(|(a, b)| a * b).sum();
    let trace: f64 = (0..state.dim()).map(|i| lam[(i, i)] * state.variances[i]).sum();
    let lin: f64 = target.linear.iter().zip(m).map(|(a, b)| a * b).sum();
    let entropy: f64 = state
        .variances
        .iter()
        .map(|s| 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * s).ln())
        .sum();
    Ok(-0.5 * (quad + trace) + lin + entropy)
}

/// `KL(N(0, λ²I) ‖ Π_i N(0, σ_i²))`.
pub fn isotropic_kl(lambda2: f64, variances: &[f64]) -> f64 {
    variances
        .iter()
        .map(|s| {
            let r = lambda2 / s;
            0.5 * (r - 1.0 - r.ln())
        })
        .sum()
}

/// Isotropic variance minimising [`isotropic_kl`]: the harmonic mean of the variances.
pub fn isotropic_kl_fit(variances: &[f64]) -> Result<f64> {
    if variances.is_empty() {
        return Err(VariationalError::Empty("variance"));
    }
    if let Some((index, &value)) = variances.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(VariationalError::InvalidVariance { index, value });
    }
    Ok(variances.len() as f64 / variances.iter().map(|s| 1.0 / s).sum::<f64>())
}
