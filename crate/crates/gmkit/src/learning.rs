//! Parameter estimation for binary Bayesian networks and small continuous models.
//!
//! CPT cells are indexed by parent configuration with the first parent varying fastest,
//! matching the flat layout of [`Factor`].

use std::collections::BTreeMap;

use thiserror::Error;

use crate::factor::{Factor, FactorError, Variable};
use crate::graph::{Dag, GraphError};
use crate::numerics::{matrix_sqrt_psd, sym_eigen, Lu, Matrix, NumericError};
use crate::sequential::{Gaussian1, SequentialError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearningError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Gaussian(#[from] SequentialError),
    #[error("dataset is empty")]
    EmptyData,
    #[error("column {0} appears twice")]
    DuplicateColumn(String),
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("row {row} column {column} holds {value}, expected 0 or 1")]
    NonBinary { row: usize, column: String, value: i64 },
    #[error("no data column for node {0}")]
    MissingColumn(String),
    #[error("hyperparameters must be positive, got alpha {alpha}, beta {beta}")]
    InvalidHyperparameters { alpha: f64, beta: f64 },
    #[error("{name} must be positive and finite, got {value}")]
    InvalidVariance { name: &'static str, value: f64 },
    #[error("entry {value} at row {row} is not ±1")]
    NotSpin { row: usize, value: i64 },
    #[error("empirical moment {0} has no finite maximum-likelihood estimate")]
    BoundaryMoment(f64),
    #[error("score-matching matrix M is singular")]
    SingularDesign,
    #[error("evaluator returned a {rows}×{cols} matrix, expected {exp_rows}×{exp_cols}")]
    EvaluatorShape { rows: usize, cols: usize, exp_rows: usize, exp_cols: usize },
    #[error("covariance is not positive semi-definite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

type Result<T> = std::result::Result<T, LearningError>;

/// Named columns of 0/1 observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    columns: Vec<String>,
    rows: Vec<Vec<u8>>,
}

impl BinaryDataset {
    pub fn new<S: Into<String>>(columns: Vec<S>, rows: Vec<Vec<i64>>) -> Result<Self> {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(LearningError::DuplicateColumn(c.clone()));
            }
        }
        let mut out = Vec::with_capacity(rows.len());
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != columns.len() {
                return Err(LearningError::RaggedRow { row: r, expected: columns.len(), got: row.len() });
            }
            let mut bits = Vec::with_capacity(row.len());
            for (c, v) in row.into_iter().enumerate() {
                match v {
                    0 | 1 => bits.push(v as u8),
                    _ => {
                        return Err(LearningError::NonBinary { row: r, column: columns[c].clone(), value: v });
                    }
                }
            }
            out.push(bits);
        }
        Ok(BinaryDataset { columns, rows: out })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<u8>> {
        self.column_index(name).map(|j| self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Counts of `x = 1` and `x = 0` within one parent configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellCounts {
    pub ones: usize,
    pub zeros: usize,
}

impl CellCounts {
    pub fn total(&self) -> usize {
        self.ones + self.zeros
    }
}

/// An MLE cell; parent configurations absent from the data have no estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CptEntry {
    Defined(f64),
    Undefined,
}

impl CptEntry {
    pub fn value(&self) -> Option<f64> {
        match self {
            CptEntry::Defined(p) => Some(*p),
            CptEntry::Undefined => None,
        }
    }
}

/// Per-parent-configuration counts for one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeCounts {
    pub node: String,
    pub parents: Vec<String>,
    pub cells: Vec<CellCounts>,
}

impl NodeCounts {
    /// Parent states of cell `s` (first parent fastest).
    pub fn parent_states(&self, s: usize) -> Vec<usize> {
        (0..self.parents.len()).map(|k| (s >> k) & 1).collect()
    }

    /// Cell index of a parent configuration.
    pub fn cell_index(&self, parent_states: &[usize]) -> usize {
        parent_states.iter().enumerate().map(|(k, &x)| x << k).sum()
    }
}

/// Maximum-likelihood `p(x_i = 1 | pa_i = s)` per node and parent configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CptEstimate {
    pub counts: BTreeMap<String, NodeCounts>,
    pub estimates: BTreeMap<String, Vec<CptEntry>>,
}

impl CptEstimate {
    /// MLE for `node` at a parent configuration given in the DAG's parent order.
    pub fn get(&self, node: &str, parent_states: &[usize]) -> Option<CptEntry> {
        let c = self.counts.get(node)?;
        self.estimates.get(node)?.get(c.cell_index(parent_states)).copied()
    }
}

/// Beta distribution with positive parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(LearningError::InvalidHyperparameters { alpha, beta });
        }
        Ok(BetaParams { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Conjugate update with observed counts.
    pub fn update(&self, counts: CellCounts) -> BetaParams {
        BetaParams {
            alpha: self.alpha + counts.ones as f64,
            beta: self.beta + counts.zeros as f64,
        }
    }
}

/// Beta posteriors for one node; the predictive `p(x = 1 | pa = s, D)` is the posterior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesCpt {
    pub node: String,
    pub parents: Vec<String>,
    pub posteriors: Vec<BetaParams>,
}

impl BayesCpt {
    pub fn predictive(&self) -> Vec<f64> {
        self.posteriors.iter().map(BetaParams::mean).collect()
    }

    /// Predictive CPT as a factor over `(node, parents…)`.
    pub fn to_factor(&self) -> Result<Factor> {
        let mut scope = vec![Variable::binary(&self.node)];
        scope.extend(self.parents.iter().map(Variable::binary));
        let mut values = Vec::with_capacity(2 * self.posteriors.len());
        for p in self.predictive() {
            values.push(1.0 - p);
            values.push(p);
        }
        Ok(Factor::new(scope, values)?)
    }
}

/// Counts `n^s_{x_i=1}` and `n^s_{x_i=0}` for every node of `dag`.
pub fn cpt_counts(dag: &Dag, data: &BinaryDataset) -> Result<BTreeMap<String, NodeCounts>> {
    let col = |n: &str| data.column_index(n).ok_or_else(|| LearningError::MissingColumn(n.to_string()));
    let mut out = BTreeMap::new();
    for node in dag.nodes() {
        let j = col(node)?;
        let parents = dag.parents(node)?.to_vec();
        let pj: Vec<usize> = parents.iter().map(|p| col(p)).collect::<Result<_>>()?;
        let mut cells = vec![CellCounts::default(); 1 << parents.len()];
        for row in data.rows() {
            let s: usize = pj.iter().enumerate().map(|(k, &c)| (row[c] as usize) << k).sum();
            if row[j] == 1 {
                cells[s].ones += 1;
            } else {
                cells[s].zeros += 1;
            }
        }
        out.insert(node.clone(), NodeCounts { node: node.clone(), parents, cells });
    }
    Ok(out)
}

/// Maximum-likelihood CPTs; unobserved parent configurations are [`CptEntry::Undefined`].
pub fn fit_cpt_mle(dag: &Dag, data: &BinaryDataset) -> Result<CptEstimate> {
    let counts = cpt_counts(dag, data)?;
    let estimates = counts
        .iter()
        .map(|(n, c)| {
            let e = c
                .cells
                .iter()
                .map(|cell| match cell.total() {
                    0 => CptEntry::Undefined,
                    t => CptEntry::Defined(cell.ones as f64 / t as f64),
                })
                .collect();
            (n.clone(), e)
        })
        .collect();
    Ok(CptEstimate { counts, estimates })
}

/// Beta(`alpha0`, `beta0`) prior on every cell, updated with the counts.
pub fn fit_cpt_bayes(dag: &Dag, data: &BinaryDataset, alpha0: f64, beta0: f64) -> Result<BTreeMap<String, BayesCpt>> {
    let prior = BetaParams::new(alpha0, beta0)?;
    Ok(cpt_counts(dag, data)?
        .into_iter()
        .map(|(n, c)| {
            let posteriors = c.cells.iter().map(|cell| prior.update(*cell)).collect();
            (n, BayesCpt { node: c.node, parents: c.parents, posteriors })
        })
        .collect())
}

/// Fraction of ones.
pub fn bernoulli_mle(data: &[u8]) -> Result<f64> {
    if data.is_empty() {
        return Err(LearningError::EmptyData);
    }
    if let Some((row, &v)) = data.iter().enumerate().find(|(_, v)| **v > 1) {
        return Err(LearningError::NonBinary { row, column: String::new(), value: v as i64 });
    }
    Ok(data.iter().filter(|v| **v == 1).count() as f64 / data.len() as f64)
}

/// Sample mean and variance with divisor `n`.
pub fn gaussian_mle(data: &[f64]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(LearningError::EmptyData);
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var))
}

/// Posterior of a Gaussian mean with known variance `sigma2` under a Gaussian prior.
///
/// With no data the prior is returned unchanged.
pub fn gaussian_mean_posterior(data: &[f64], sigma2: f64, prior: Gaussian1) -> Result<Gaussian1> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(LearningError::InvalidVariance { name: "sigma2", value: sigma2 });
    }
    if data.is_empty() {
        return Ok(prior);
    }
    let (xbar, _) = gaussian_mle(data)?;
    let s = sigma2 / data.len() as f64;
    let (m0, v0) = (prior.mean(), prior.variance());
    Ok(Gaussian1::new(m0 + v0 / (s + v0) * (xbar - m0), v0 * s / (v0 + s))?)
}

/// Quadratic score-matching objective `J(θ) = θᵀr + ½θᵀMθ` and its minimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatchingFit {
    pub theta: Vec<f64>,
    pub r: Vec<f64>,
    pub m: Matrix,
}

impl ScoreMatchingFit {
    pub fn objective(&self, theta: &[f64]) -> f64 {
        let mt = self.m.matvec(theta).expect("theta has the model dimension");
        theta.iter().zip(&self.r).map(|(t, r)| t * r).sum::<f64>()
            + 0.5 * theta.iter().zip(&mt).map(|(t, m)| t * m).sum::<f64>()
    }
}

/// Score matching for `p(x; θ) ∝ exp(θᵀF(x))`.
///
/// `k(x)` returns `K_kj = ∂F_k/∂x_j` and `h(x)` returns `H_kj = ∂²F_k/∂x_j²`, both
/// `dim × m` for `m`-dimensional points.
pub fn score_matching_fit<K, H>(data: &[Vec<f64>], dim: usize, k: K, h: H) -> Result<ScoreMatchingFit>
where
    K: Fn(&[f64]) -> Matrix,
    H: Fn(&[f64]) -> Matrix,
{
    if data.is_empty() {
        return Err(LearningError::EmptyData);
    }
    let m_dim = data[0].len();
    let mut r = vec![0.0; dim];
    let mut m = Matrix::zeros(dim, dim);
    let check = |a: &Matrix| {
        if a.rows() != dim || a.cols() != m_dim {
            Err(LearningError::EvaluatorShape { rows: a.rows(), cols: a.cols(), exp_rows: dim, exp_cols: m_dim })
        } else {
            Ok(())
        }
    };
    for x in data {
        if x.len() != m_dim {
            return Err(LearningError::DimensionMismatch(format!("point of length {} among length {m_dim}", x.len())));
        }
        let kx = k(x);
        let hx = h(x);
        check(&kx)?;
        check(&hx)?;
        for (a, ra) in r.iter_mut().enumerate() {
            *ra += hx.row(a).iter().sum::<f64>();
        }
        m = m.add(&kx.matmul(&kx.transpose())?)?;
    }
    let n = data.len() as f64;
    r.iter_mut().for_each(|x| *x /= n);
    let m = m.scale(1.0 / n);
    let lu = Lu::new(&m)?;
    if lu.is_singular() {
        return Err(LearningError::SingularDesign);
    }
    let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
    let theta = lu.solve(&neg_r)?;
    Ok(ScoreMatchingFit { theta, r, m })
}

/// `log Z(θ)` for `p(x₁, x₂) ∝ exp(θx₁x₂ + x₁ + x₂)` on `{−1, 1}²`.
pub fn ising2_log_z(theta: f64) -> f64 {
    let terms = [2f64.ln() - theta, theta + 2.0, theta - 2.0];
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `d log Z / dθ = E_θ[x₁x₂]`.
pub fn ising2_moment(theta: f64) -> f64 {
    let lz = ising2_log_z(theta);
    let w = |t: f64| (t - lz).exp();
    -2.0 * w(-theta) + w(theta + 2.0) + w(theta - 2.0)
}

const ISING_BRACKET: f64 = 20.0;

/// θ with `E_θ[x₁x₂] = moment`, by bisection on `[−20, 20]` to width 1e-10.
pub fn ising2_mle_from_moment(moment: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-ISING_BRACKET, ISING_BRACKET);
    // |moment| = 1 has no finite root; f(±20) rounds to ±1
    if !(moment.abs() < 1.0 && moment > ising2_moment(lo) && moment < ising2_moment(hi)) {
        return Err(LearningError::BoundaryMoment(moment));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if ising2_moment(mid) < moment {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximum-likelihood θ from `(x₁, x₂)` pairs with entries in `{−1, 1}`.
pub fn ising2_mle(data: &[(i64, i64)]) -> Result<f64> {
    if data.is_empty() {
        return Err(LearningError::EmptyData);
    }
    for (row, &(a, b)) in data.iter().enumerate() {
        for value in [a, b] {
            if value != 1 && value != -1 {
                return Err(LearningError::NotSpin { row, value });
            }
        }
    }
    let moment = data.iter().map(|(a, b)| (a * b) as f64).sum::<f64>() / data.len() as f64;
    ising2_mle_from_moment(moment)
}

const PSD_TOL: f64 = 1e-9;

fn check_covariance(c: &Matrix) -> Result<()> {
    if !c.is_square() {
        return Err(LearningError::DimensionMismatch("factor covariance must be square".into()));
    }
    let e = sym_eigen(c)?;
    let min = e.values.last().copied().unwrap_or(0.0);
    if min < -PSD_TOL * c.max_abs().max(1.0) {
        return Err(LearningError::NotPsd(min));
    }
    Ok(())
}

/// Marginal `N(c, F C Fᵀ + Ψ)` of the observations in a factor-analysis model.
pub fn fa_marginal(f: &Matrix, c: &Matrix, psi: &[f64], mean: &[f64]) -> Result<(Vec<f64>, Matrix)> {
    check_covariance(c)?;
    if f.cols() != c.rows() || psi.len() != f.rows() || mean.len() != f.rows() {
        return Err(LearningError::DimensionMismatch(format!(
            "F is {}×{}, C is {}×{}, Ψ has {}, mean has {}",
            f.rows(),
            f.cols(),
            c.rows(),
            c.cols(),
            psi.len(),
            mean.len()
        )));
    }
    if let Some(&value) = psi.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(LearningError::InvalidVariance { name: "psi", value });
    }
    let cov = f.matmul(c)?.matmul(&f.transpose())?.add(&Matrix::diag(psi))?;
    Ok((mean.to_vec(), cov))
}

/// Loading matrix `F C^{1/2}` of the equivalent model with identity factor covariance.
pub fn fa_standardise(f: &Matrix, c: &Matrix) -> Result<Matrix> {
    check_covariance(c)?;
    if f.cols() != c.rows() {
        return Err(LearningError::DimensionMismatch(format!("F has {} columns, C is {}×{}", f.cols(), c.rows(), c.cols())));
    }
    Ok(f.matmul(&matrix_sqrt_psd(c)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cancer() -> (Dag, BinaryDataset) {
        let dag = Dag::from_edges(&[("a", "c"), ("s", "c")], &[]).unwrap();
        let rows = vec![vec![0, 1, 1], vec![0, 0, 0], vec![1, 0, 1], vec![0, 0, 0], vec![0, 1, 0]];
        (dag, BinaryDataset::new(vec!["a", "s", "c"], rows).unwrap())
    }

    #[test]
    fn cancer_mle_has_undefined_cell() {
        let (dag, data) = cancer();
        let est = fit_cpt_mle(&dag, &data).unwrap();
        assert_eq!(est.estimates["a"], vec![CptEntry::Defined(0.2)]);
        assert_eq!(est.estimates["s"], vec![CptEntry::Defined(0.4)]);
        assert_eq!(
            est.estimates["c"],
            vec![CptEntry::Defined(0.0), CptEntry::Defined(1.0), CptEntry::Defined(0.5), CptEntry::Undefined]
        );
        assert_eq!(est.get("c", &[1, 0]), Some(CptEntry::Defined(1.0)));
    }

    #[test]
    fn cancer_bayes_predictive() {
        let (dag, data) = cancer();
        let post = fit_cpt_bayes(&dag, &data, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(post["a"].predictive()[0], 2.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(post["s"].predictive()[0], 3.0 / 7.0, epsilon = 1e-15);
        let c = post["c"].predictive();
        for (got, want) in c.iter().zip([0.25, 2.0 / 3.0, 0.5, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let f = post["c"].to_factor().unwrap();
        assert_eq!(f.names().collect::<Vec<_>>(), ["c", "a", "s"]);
        assert_abs_diff_eq!(f.get(&[1, 0, 1]), 2.0 / 3.0 * 0.0 + 0.5, epsilon = 1e-15);
    }

    #[test]
    fn no_data_gives_prior_mean() {
        let (dag, _) = cancer();
        let empty = BinaryDataset::new(vec!["a", "s", "c"], vec![]).unwrap();
        let post = fit_cpt_bayes(&dag, &empty, 2.0, 3.0).unwrap();
        assert!(post["c"].predictive().iter().all(|p| (p - 0.4).abs() < 1e-15));
        assert!(fit_cpt_bayes(&dag, &empty, 0.0, 1.0).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(BinaryDataset::new(vec!["a"], vec![vec![2]]), Err(LearningError::NonBinary { .. })));
        assert!(matches!(BinaryDataset::new(vec!["a", "b"], vec![vec![1]]), Err(LearningError::RaggedRow { .. })));
        assert!(matches!(BinaryDataset::new(vec!["a", "a"], vec![]), Err(LearningError::DuplicateColumn(_))));
        let (dag, _) = cancer();
        let short = BinaryDataset::new(vec!["a", "s"], vec![vec![0, 1]]).unwrap();
        assert!(matches!(fit_cpt_mle(&dag, &short), Err(LearningError::MissingColumn(_))));
    }

    #[test]
    fn bernoulli_and_gaussian_estimators() {
        assert_eq!(bernoulli_mle(&[1, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(bernoulli_mle(&[1, 1]).unwrap(), 1.0);
        assert_eq!(bernoulli_mle(&[0, 0, 0]).unwrap(), 0.0);
        assert!(bernoulli_mle(&[]).is_err());
        assert_eq!(gaussian_mle(&[0.0, 2.0]).unwrap(), (1.0, 1.0));
        assert_eq!(gaussian_mle(&[3.0; 4]).unwrap(), (3.0, 0.0));
        assert!(gaussian_mle(&[]).is_err());
    }

    #[test]
    fn mean_posterior_limits() {
        let prior = Gaussian1::new(5.0, 2.0).unwrap();
        assert_eq!(gaussian_mean_posterior(&[], 1.0, prior).unwrap(), prior);
        let flat = Gaussian1::new(0.0, 1e12).unwrap();
        let p = gaussian_mean_posterior(&[1.0, 2.0, 6.0], 3.0, flat).unwrap();
        assert_abs_diff_eq!(p.mean(), 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.variance(), 1.0, epsilon = 1e-9);
        assert!(gaussian_mean_posterior(&[1.0], 0.0, prior).is_err());
    }

    #[test]
    fn gaussian_score_matching() {
        let k = |x: &[f64]| Matrix::from_row_major(1, 1, vec![2.0 * x[0]]).unwrap();
        let h = |_: &[f64]| Matrix::from_row_major(1, 1, vec![2.0]).unwrap();
        let data = vec![vec![1.0], vec![-1.0]];
        let fit = score_matching_fit(&data, 1, k, h).unwrap();
        assert_abs_diff_eq!(fit.theta[0], -0.5, epsilon = 1e-15);
        let data = vec![vec![0.5], vec![-2.0], vec![1.5]];
        let m2 = data.iter().map(|x| x[0] * x[0]).sum::<f64>() / 3.0;
        let fit = score_matching_fit(&data, 1, k, h).unwrap();
        assert_abs_diff_eq!(fit.theta[0], -1.0 / (2.0 * m2), epsilon = 1e-14);
    }

    #[test]
    fn constant_statistic_is_singular() {
        let k = |x: &[f64]| Matrix::from_row_major(2, 1, vec![2.0 * x[0], 0.0]).unwrap();
        let h = |_: &[f64]| Matrix::from_row_major(2, 1, vec![2.0, 0.0]).unwrap();
        assert!(matches!(
            score_matching_fit(&[vec![1.0], vec![2.0]], 2, k, h),
            Err(LearningError::SingularDesign)
        ));
    }

    #[test]
    fn ising_root_and_boundaries() {
        let z = |t: f64| 2.0 * (-t).exp() + (t + 2.0).exp() + (t - 2.0).exp();
        for t in [-3.0, -1.0, 0.0, 0.7, 4.0] {
            assert_abs_diff_eq!(ising2_log_z(t), z(t).ln(), epsilon = 1e-12);
        }
        let theta = ising2_mle_from_moment(-1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(theta, -1.0, epsilon = 0.05);
        // root of the closed-form moment found by an external bracketing solver
        assert_abs_diff_eq!(theta, -1.009074963958905, epsilon = 1e-9);
        assert_abs_diff_eq!(ising2_moment(theta), -1.0 / 3.0, epsilon = 1e-9);
        let zero = ising2_mle_from_moment(0.0).unwrap();
        assert!(ising2_moment(zero).abs() < 1e-9);
        assert!(matches!(ising2_mle(&[(1, 1)]), Err(LearningError::BoundaryMoment(_))));
        assert!(matches!(ising2_mle(&[(1, -1), (-1, 1)]), Err(LearningError::BoundaryMoment(_))));
        assert!(matches!(ising2_mle(&[(1, 0)]), Err(LearningError::NotSpin { .. })));
    }

    #[test]
    fn ising_moment_increases() {
        let grid: Vec<f64> = (-100..=100).map(|i| i as f64 * 0.1).collect();
        for w in grid.windows(2) {
            assert!(ising2_moment(w[1]) > ising2_moment(w[0]));
        }
    }

    #[test]
    fn factor_analysis_identity_covariance() {
        let f = Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.0, 1.0]]).unwrap();
        let c = Matrix::identity(2);
        let (mean, cov) = fa_marginal(&f, &c, &[0.1, 0.2, 0.3], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(mean, vec![1.0, 2.0, 3.0]);
        let expected = f.matmul(&f.transpose()).unwrap().add(&Matrix::diag(&[0.1, 0.2, 0.3])).unwrap();
        assert!(cov.max_abs_diff(&expected) < 1e-15);
        assert!(fa_standardise(&f, &c).unwrap().max_abs_diff(&f) < 1e-12);
        let not_psd = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(fa_standardise(&f, &not_psd), Err(LearningError::NotPsd(_))));
        assert!(fa_marginal(&f, &c, &[0.1, -0.2, 0.3], &[0.0; 3]).is_err());
    }
}
