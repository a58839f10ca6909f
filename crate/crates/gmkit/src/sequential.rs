//! Discrete hidden Markov model inference and the scalar Kalman filter.
//!
//! Time indices in the public API are 1-based, matching `h_1, …, h_n`. Matrices are row
//! lists: `transitions[s][i][j] = p(h_{s+2} = j | h_{s+1} = i)` and
//! `emissions[s][i][k] = p(v_{s+1} = k | h_{s+1} = i)`, so a chain of length `n` has
//! `n − 1` transition matrices and `n` emission matrices.
//!
//! Filtered messages are stored normalised; `log_scales[s]` is `log p(v_{1:s+1})`, so the
//! unnormalised `α(h_s) = p(h_s, v_{1:s})` is recovered by multiplying back.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SequentialError {
    #[error("chain has no steps")]
    EmptyChain,
    #[error("no observations")]
    EmptyObservations,
    #[error("{got} observations for a chain of length {len}")]
    TooManyObservations { got: usize, len: usize },
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("{what} has {got} hidden states, expected {expected}")]
    StateCount { what: String, expected: usize, got: usize },
    #[error("{what} contains an invalid probability {value}")]
    InvalidProbability { what: String, value: f64 },
    #[error("{what} sums to {sum}, not 1")]
    NotStochastic { what: String, sum: f64 },
    #[error("observation {symbol} at step {step} is outside an alphabet of size {alphabet}")]
    ObservationOutOfRange { step: usize, symbol: usize, alphabet: usize },
    #[error("observations have probability zero")]
    ImpossibleEvidence,
    #[error("time {t} is outside {lo}..={hi}")]
    TimeOutOfRange { t: usize, lo: usize, hi: usize },
    #[error("hidden state {0} is out of range")]
    StateOutOfRange(usize),
    #[error("invalid Gaussian: mean {mean}, variance {variance}")]
    InvalidGaussian { mean: f64, variance: f64 },
    #[error("invalid coefficient {name} = {value} at step {step}")]
    InvalidCoefficient { name: &'static str, step: usize, value: f64 },
    #[error("computed variance {value} at step {step} is not positive")]
    NonPositiveVariance { step: usize, value: f64 },
}

type Result<T> = std::result::Result<T, SequentialError>;
type Matrix = Vec<Vec<f64>>;

fn check_distribution(what: String, p: &[f64]) -> Result<()> {
    if let Some(&value) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(SequentialError::InvalidProbability { what, value });
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(SequentialError::NotStochastic { what, sum });
    }
    Ok(())
}

fn normalise(p: &mut [f64]) -> Result<f64> {
    let z: f64 = p.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(SequentialError::ImpossibleEvidence);
    }
    p.iter_mut().for_each(|x| *x /= z);
    Ok(z)
}

/// Discrete HMM with per-step transition and emission matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHmm {
    prior: Vec<f64>,
    transitions: Vec<Matrix>,
    emissions: Vec<Matrix>,
}

/// Normalised filtered marginals `p(h_s | v_{1:s})` with cumulative log-evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub marginals: Vec<Vec<f64>>,
    /// `log_scales[s] = log p(v_{1:s+1})`.
    pub log_scales: Vec<f64>,
}

impl Filtered {
    pub fn log_likelihood(&self) -> f64 {
        *self.log_scales.last().expect("filters cover at least one step")
    }

    /// Unnormalised `α(h_t) = p(h_t, v_{1:t})` for 1-based `t`.
    pub fn alpha(&self, t: usize) -> Vec<f64> {
        let s = self.log_scales[t - 1].exp();
        self.marginals[t - 1].iter().map(|x| x * s).collect()
    }
}

/// Predictive distribution over `h_t` with the log-evidence of the conditioning prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenPrediction {
    pub probs: Vec<f64>,
    /// `log p(v_{1:u})`; `probs · exp(log_evidence)` is the unnormalised `α(h_t)`.
    pub log_evidence: f64,
}

impl HiddenPrediction {
    pub fn unnormalised(&self) -> Vec<f64> {
        let s = self.log_evidence.exp();
        self.probs.iter().map(|x| x * s).collect()
    }
}

/// Smoothed single-site and adjacent-pair posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub marginals: Vec<Vec<f64>>,
    /// `pairwise[s][i][j] = p(h_{s+1} = i, h_{s+2} = j | v_{1:n})`.
    pub pairwise: Vec<Matrix>,
    pub log_likelihood: f64,
}

impl DiscreteHmm {
    pub fn new(prior: Vec<f64>, transitions: Vec<Matrix>, emissions: Vec<Matrix>) -> Result<Self> {
        let n = emissions.len();
        if n == 0 {
            return Err(SequentialError::EmptyChain);
        }
        if transitions.len() + 1 != n {
            return Err(SequentialError::LengthMismatch {
                what: "transition matrices",
                expected: n - 1,
                got: transitions.len(),
            });
        }
        let k = prior.len();
        check_distribution("prior".into(), &prior)?;
        for (s, m) in transitions.iter().enumerate() {
            let what = || format!("transition {}→{}", s + 1, s + 2);
            if m.len() != k {
                return Err(SequentialError::StateCount { what: what(), expected: k, got: m.len() });
            }
            for (i, row) in m.iter().enumerate() {
                if row.len() != k {
                    return Err(SequentialError::StateCount { what: what(), expected: k, got: row.len() });
                }
                check_distribution(format!("{} row {i}", what()), row)?;
            }
        }
        for (s, m) in emissions.iter().enumerate() {
            let what = format!("emission {}", s + 1);
            if m.len() != k {
                return Err(SequentialError::StateCount { what, expected: k, got: m.len() });
            }
            for (i, row) in m.iter().enumerate() {
                if row.len() != m[0].len() {
                    return Err(SequentialError::LengthMismatch {
                        what: "emission symbols",
                        expected: m[0].len(),
                        got: row.len(),
                    });
                }
                check_distribution(format!("{what} row {i}"), row)?;
            }
        }
        Ok(DiscreteHmm {
            prior,
            transitions,
            emissions,
        })
    }

    /// The same transition and emission matrix at every step.
    pub fn homogeneous(prior: Vec<f64>, transition: Matrix, emission: Matrix, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(SequentialError::EmptyChain);
        }
        Self::new(prior, vec![transition; len - 1], vec![emission; len])
    }

    pub fn len(&self) -> usize {
        self.emissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    pub fn states(&self) -> usize {
        self.prior.len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn transitions(&self) -> &[Matrix] {
        &self.transitions
    }

    pub fn emissions(&self) -> &[Matrix] {
        &self.emissions
    }

    fn check_observations(&self, v: &[usize]) -> Result<()> {
        if v.is_empty() {
            return Err(SequentialError::EmptyObservations);
        }
        if v.len() > self.len() {
            return Err(SequentialError::TooManyObservations { got: v.len(), len: self.len() });
        }
        for (s, &x) in v.iter().enumerate() {
            let alphabet = self.emissions[s][0].len();
            if x >= alphabet {
                return Err(SequentialError::ObservationOutOfRange {
                    step: s + 1,
                    symbol: x,
                    alphabet,
                });
            }
        }
        Ok(())
    }

    /// One transition step `Σ_i p(i) T[i][j]` using the matrix into step `s + 2`.
    fn propagate(&self, s: usize, p: &[f64]) -> Vec<f64> {
        let k = self.states();
        let mut out = vec![0.0; k];
        for (i, pi) in p.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += pi * self.transitions[s][i][j];
            }
        }
        out
    }

    fn emission_column(&self, s: usize, x: usize) -> impl Iterator<Item = f64> + '_ {
        self.emissions[s].iter().map(move |row| row[x])
    }
}

/// Forward recursion over the observed prefix `v_{1:t}`.
pub fn alpha_filter(hmm: &DiscreteHmm, v: &[usize]) -> Result<Filtered> {
    hmm.check_observations(v)?;
    let mut marginals: Vec<Vec<f64>> = Vec::with_capacity(v.len());
    let mut log_scales = Vec::with_capacity(v.len());
    let mut log_z = 0.0;
    for (s, &x) in v.iter().enumerate() {
        let predicted = if s == 0 {
            hmm.prior.clone()
        } else {
            hmm.propagate(s - 1, &marginals[s - 1])
        };
        let mut a: Vec<f64> = predicted.iter().zip(hmm.emission_column(s, x)).map(|(p, e)| p * e).collect();
        log_z += normalise(&mut a)?.ln();
        marginals.push(a);
        log_scales.push(log_z);
    }
    Ok(Filtered { marginals, log_scales })
}

/// `p(h_t | v_{1:u})` for `u = v.len() ≤ t ≤ n`.
pub fn predict_hidden(hmm: &DiscreteHmm, v: &[usize], t: usize) -> Result<HiddenPrediction> {
    let filtered = alpha_filter(hmm, v)?;
    let u = v.len();
    if t < u || t > hmm.len() {
        return Err(SequentialError::TimeOutOfRange { t, lo: u, hi: hmm.len() });
    }
    let mut p = filtered.marginals[u - 1].clone();
    for s in u..t {
        p = hmm.propagate(s - 1, &p);
    }
    normalise(&mut p)?;
    Ok(HiddenPrediction {
        probs: p,
        log_evidence: filtered.log_likelihood(),
    })
}

/// `p(v_t | v_{1:u})` for `u = v.len() < t ≤ n`.
pub fn predict_visible(hmm: &DiscreteHmm, v: &[usize], t: usize) -> Result<Vec<f64>> {
    if t <= v.len() {
        return Err(SequentialError::TimeOutOfRange { t, lo: v.len() + 1, hi: hmm.len() });
    }
    let h = predict_hidden(hmm, v, t)?.probs;
    let alphabet = hmm.emissions[t - 1][0].len();
    Ok((0..alphabet)
        .map(|k| h.iter().zip(&hmm.emissions[t - 1]).map(|(p, row)| p * row[k]).sum())
        .collect())
}

/// Alpha-beta smoothing over the observed steps; `β(h_n) = 1` at the last observed step.
pub fn smooth(hmm: &DiscreteHmm, v: &[usize]) -> Result<Smoothed> {
    let filtered = alpha_filter(hmm, v)?;
    let n = v.len();
    let k = hmm.states();
    // β is kept normalised per step; only ratios within a step matter below
    let mut beta = vec![vec![1.0; k]; n];
    for s in (0..n - 1).rev() {
        let mut b = vec![0.0; k];
        for (i, bi) in b.iter_mut().enumerate() {
            *bi = (0..k)
                .map(|j| hmm.transitions[s][i][j] * hmm.emissions[s + 1][j][v[s + 1]] * beta[s + 1][j])
                .sum();
        }
        normalise(&mut b)?;
        beta[s] = b;
    }
    let mut marginals = Vec::with_capacity(n);
    for s in 0..n {
        let mut m: Vec<f64> = filtered.marginals[s].iter().zip(&beta[s]).map(|(a, b)| a * b).collect();
        normalise(&mut m)?;
        marginals.push(m);
    }
    let mut pairwise = Vec::with_capacity(n.saturating_sub(1));
    for s in 0..n.saturating_sub(1) {
        let mut m = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                m[i][j] = filtered.marginals[s][i]
                    * hmm.transitions[s][i][j]
                    * hmm.emissions[s + 1][j][v[s + 1]]
                    * beta[s + 1][j];
            }
        }
        let z: f64 = m.iter().flatten().sum();
        if !(z > 0.0) {
            return Err(SequentialError::ImpossibleEvidence);
        }
        m.iter_mut().flatten().for_each(|x| *x /= z);
        pairwise.push(m);
    }
    Ok(Smoothed {
        marginals,
        pairwise,
        log_likelihood: filtered.log_likelihood(),
    })
}

/// Most probable hidden path and `log p(h*, v)`; ties go to the lowest state.
pub fn viterbi(hmm: &DiscreteHmm, v: &[usize]) -> Result<(Vec<usize>, f64)> {
    hmm.check_observations(v)?;
    let k = hmm.states();
    let mut score: Vec<f64> = hmm
        .prior
        .iter()
        .zip(hmm.emission_column(0, v[0]))
        .map(|(p, e)| p.ln() + e.ln())
        .collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(v.len());
    for s in 1..v.len() {
        let mut next = vec![f64::NEG_INFINITY; k];
        let mut arg = vec![0; k];
        for j in 0..k {
            for i in 0..k {
                let c = score[i] + hmm.transitions[s - 1][i][j].ln();
                if c > next[j] {
                    next[j] = c;
                    arg[j] = i;
                }
            }
            next[j] += hmm.emissions[s][j][v[s]].ln();
        }
        back.push(arg);
        score = next;
    }
    let mut best = 0;
    for (i, x) in score.iter().enumerate() {
        if *x > score[best] {
            best = i;
        }
    }
    if score[best] == f64::NEG_INFINITY {
        return Err(SequentialError::ImpossibleEvidence);
    }
    let mut path = vec![best];
    for arg in back.iter().rev() {
        path.push(arg[*path.last().unwrap()]);
    }
    path.reverse();
    Ok((path, score[best]))
}

/// `p(h_{t−1} | h_t, v_{1:t})` for 1-based `t ≥ 2`, proportional to `α(h_{t−1}) p(h_t | h_{t−1})`.
///
/// The emission term `p(v_t | h_t)` is constant in `h_{t−1}` and cancels.
pub fn backward_kernel(hmm: &DiscreteHmm, filtered: &Filtered, t: usize, h_t: usize) -> Result<Vec<f64>> {
    if t < 2 || t > filtered.marginals.len() {
        return Err(SequentialError::TimeOutOfRange { t, lo: 2, hi: filtered.marginals.len() });
    }
    if h_t >= hmm.states() {
        return Err(SequentialError::StateOutOfRange(h_t));
    }
    let mut w: Vec<f64> = filtered.marginals[t - 2]
        .iter()
        .zip(&hmm.transitions[t - 2])
        .map(|(a, row)| a * row[h_t])
        .collect();
    normalise(&mut w)?;
    Ok(w)
}

/// Forward filtering, backward sampling of one hidden path from `p(h_{1:n} | v_{1:n})`.
pub fn ffbs<R: Rng + ?Sized>(hmm: &DiscreteHmm, v: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    let filtered = alpha_filter(hmm, v)?;
    ffbs_with(hmm, &filtered, rng)
}

/// FFBS reusing a precomputed forward pass.
pub fn ffbs_with<R: Rng + ?Sized>(hmm: &DiscreteHmm, filtered: &Filtered, rng: &mut R) -> Result<Vec<usize>> {
    let n = filtered.marginals.len();
    let draw = |w: &[f64], rng: &mut R| -> Result<usize> {
        let d = WeightedIndex::new(w).map_err(|_| SequentialError::ImpossibleEvidence)?;
        Ok(d.sample(rng))
    };
    let mut path = vec![0; n];
    path[n - 1] = draw(&filtered.marginals[n - 1], rng)?;
    for t in (2..=n).rev() {
        let w = backward_kernel(hmm, filtered, t, path[t - 1])?;
        path[t - 2] = draw(&w, rng)?;
    }
    Ok(path)
}

/// Scalar Gaussian `N(mean, variance)` with finite positive variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1 {
    mean: f64,
    variance: f64,
}

impl Gaussian1 {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
            return Err(SequentialError::InvalidGaussian { mean, variance });
        }
        Ok(Gaussian1 { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        (-0.5 * d * d / self.variance).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }
}

/// Normalised product of two Gaussian densities in the same variable.
pub fn gaussian_product(a: Gaussian1, b: Gaussian1) -> Gaussian1 {
    let s = a.variance + b.variance;
    Gaussian1 {
        mean: a.mean + a.variance / s * (b.mean - a.mean),
        variance: a.variance * b.variance / s,
    }
}

/// Distribution of `A h + B ξ` for `h ~ prior`, `ξ ~ N(0, 1)`.
pub fn gaussian_linear_marginal(prior: Gaussian1, a: f64, b: f64) -> Result<Gaussian1> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(SequentialError::InvalidCoefficient { name: "B", step: 0, value: b });
    }
    Gaussian1::new(a * prior.mean, a * a * prior.variance + b * b)
}

/// Scalar linear-Gaussian state-space model.
///
/// `h_1 ~ prior`, `h_s = A_s h_{s−1} + B_s ξ_s` for `s ≥ 2`, `v_s = C_s h_s + D_s η_s`.
/// `a` and `b` hold `A_2, …, A_n` and `B_2, …, B_n`; `c` and `d` hold `C_1, …, C_n` and
/// `D_1, …, D_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanModel {
    prior: Gaussian1,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

/// Filtered posterior `N(mean, variance)` of `h_s | v_{1:s}` with the gain and predictive variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanStep {
    pub mean: f64,
    pub variance: f64,
    pub gain: f64,
    /// `P_s`, the variance of `h_s | v_{1:s−1}`.
    pub predicted_variance: f64,
}

impl KalmanModel {
    pub fn new(prior: Gaussian1, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let n = c.len();
        if n == 0 {
            return Err(SequentialError::EmptyChain);
        }
        for (what, got, expected) in [("A coefficients", a.len(), n - 1), ("B coefficients", b.len(), n - 1), ("D coefficients", d.len(), n)] {
            if got != expected {
                return Err(SequentialError::LengthMismatch { what, expected, got });
            }
        }
        let bad = |name, step, value: f64| SequentialError::InvalidCoefficient { name, step, value };
        for (s, (&ai, &bi)) in a.iter().zip(&b).enumerate() {
            if !ai.is_finite() {
                return Err(bad("A", s + 2, ai));
            }
            if !(bi >= 0.0 && bi.is_finite()) {
                return Err(bad("B", s + 2, bi));
            }
        }
        for (s, (&ci, &di)) in c.iter().zip(&d).enumerate() {
            if !ci.is_finite() {
                return Err(bad("C", s + 1, ci));
            }
            if !(di >= 0.0 && di.is_finite()) || (di == 0.0 && ci == 0.0) {
                return Err(bad("D", s + 1, di));
            }
        }
        Ok(KalmanModel { prior, a, b, c, d })
    }

    /// Constant coefficients over `len` steps.
    pub fn homogeneous(prior: Gaussian1, a: f64, b: f64, c: f64, d: f64, len: usize) -> Result<Self> {
        let m = len.saturating_sub(1);
        Self::new(prior, vec![a; m], vec![b; m], vec![c; len], vec![d; len])
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn prior(&self) -> Gaussian1 {
        self.prior
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }
}

/// Filtered posteriors `p(h_s | v_{1:s})` for each observed step.
pub fn kalman_filter(model: &KalmanModel, v: &[f64]) -> Result<Vec<KalmanStep>> {
    if v.is_empty() {
        return Err(SequentialError::EmptyObservations);
    }
    if v.len() > model.len() {
        return Err(SequentialError::TooManyObservations { got: v.len(), len: model.len() });
    }
    let mut out: Vec<KalmanStep> = Vec::with_capacity(v.len());
    for (s, &obs) in v.iter().enumerate() {
        let (pred_mean, p) = match out.last() {
            None => (model.prior.mean, model.prior.variance),
            Some(prev) => {
                let (a, b) = (model.a[s - 1], model.b[s - 1]);
                (a * prev.mean, a * a * prev.variance + b * b)
            }
        };
        let (c, d) = (model.c[s], model.d[s]);
        let denom = c * c * p + d * d;
        let gain = p * c / denom;
        let mean = pred_mean + gain * (obs - c * pred_mean);
        // equals (1 − K C) P without the cancellation when K C ≈ 1
        let variance = p * d * d / denom;
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(SequentialError::NonPositiveVariance { step: s + 1, value: variance });
        }
        out.push(KalmanStep {
            mean,
            variance,
            gain,
            predicted_variance: p,
        });
    }
    Ok(out)
}
