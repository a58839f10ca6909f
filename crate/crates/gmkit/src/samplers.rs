//! Seeded Monte Carlo samplers and chain diagnostics.
//!
//! [`SeededRng`] is ChaCha20 (`rand_chacha`) seeded from a `u64`; the same seed gives the
//! same stream on every platform. Standard-normal draws use `rand_distr`'s ziggurat
//! sampler. All target densities are passed as log densities.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::numerics::{Matrix, NumericError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("{name} must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("acceptance probability is not finite at x = {x}")]
    NonFiniteAcceptance { x: f64 },
    #[error("acceptance probability {ratio} exceeds 1 at x = {x}; the bound M is too small")]
    BoundViolation { x: f64, ratio: f64 },
    #[error("{consecutive} consecutive rejections without an acceptance")]
    Stalled { consecutive: usize },
    #[error("importance weight is not finite at x = {x}")]
    NonFiniteWeight { x: f64 },
    #[error("importance weight of draw {draw} is not finite")]
    NonFiniteDrawWeight { draw: usize },
    #[error("every importance weight is zero")]
    ZeroWeights,
    #[error("log target is not finite at the initial state")]
    NonFiniteInit,
    #[error("at least one {0} is required")]
    Empty(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("series is constant")]
    ConstantSeries,
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

type Result<T> = std::result::Result<T, SamplerError>;

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SamplerError::InvalidParameter { name, value })
    }
}

/// ChaCha20 stream that remembers its seed.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.sample(Open01)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Inverse CDF of `Exp(λ)` at `u ∈ [0, 1)`.
pub fn exponential_inverse_cdf(u: f64, lambda: f64) -> f64 {
    -(1.0 - u).ln() / lambda
}

/// Inverse CDF of the zero-mean, unit-variance Laplace distribution.
pub fn laplace_unit_inverse_cdf(u: f64) -> f64 {
    let d = u - 0.5;
    -d.signum() * std::f64::consts::FRAC_1_SQRT_2 * (1.0 - 2.0 * d.abs()).ln()
}

pub fn sample_exponential<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> Result<f64> {
    positive("lambda", lambda)?;
    Ok(exponential_inverse_cdf(rng.sample(Open01), lambda))
}

/// Unit-variance Laplace draw by inverse transform.
pub fn sample_laplace_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    if u == 0.5 {
        0.0
    } else {
        laplace_unit_inverse_cdf(u)
    }
}

/// Log density of the zero-mean Laplace distribution `exp(−|x|/b)/(2b)`.
pub fn laplace_log_density(x: f64, b: f64) -> f64 {
    -x.abs() / b - (2.0 * b).ln()
}

/// Draw from the zero-mean Laplace distribution with scale `b` (variance `2b²`).
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    sample_laplace_unit(rng) * std::f64::consts::SQRT_2 * b
}

/// Smallest `M` with `N(x; 0, 1) ≤ M · Laplace(x; b)` for all `x`.
pub fn laplace_normal_bound(b: f64) -> f64 {
    2.0 * b / (2.0 * std::f64::consts::PI).sqrt() * (1.0 / (2.0 * b * b)).exp()
}

pub fn standard_normal_log_density(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionOutput {
    pub samples: Vec<f64>,
    pub proposals: usize,
}

impl RejectionOutput {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.proposals as f64
    }
}

const MAX_CONSECUTIVE_REJECTIONS: usize = 10_000_000;

/// Rejection sampling until `n` proposals are accepted.
///
/// A draw `x ~ q` is accepted with probability `p*(x) / (M q(x))`.
pub fn rejection_sample<R, P, S, Q>(
    rng: &mut R,
    log_p_star: P,
    mut sample_q: S,
    log_q: Q,
    m: f64,
    n: usize,
) -> Result<RejectionOutput>
where
    R: Rng + ?Sized,
    P: Fn(f64) -> f64,
    S: FnMut(&mut R) -> f64,
    Q: Fn(f64) -> f64,
{
    positive("M", m)?;
    let log_m = m.ln();
    let mut samples = Vec::with_capacity(n);
    let mut proposals = 0;
    let mut consecutive = 0;
    while samples.len() < n {
        let x = sample_q(rng);
        let u: f64 = rng.sample(Open01);
        proposals += 1;
        let log_a = log_p_star(x) - log_m - log_q(x);
        if log_a.is_nan() || log_a == f64::INFINITY {
            return Err(SamplerError::NonFiniteAcceptance { x });
        }
        let a = log_a.exp();
        if a > 1.0 + 1e-9 {
            return Err(SamplerError::BoundViolation { x, ratio: a });
        }
        if u < a {
            samples.push(x);
            consecutive = 0;
        } else {
            consecutive += 1;
            if consecutive >= MAX_CONSECUTIVE_REJECTIONS {
                return Err(SamplerError::Stalled { consecutive });
            }
        }
    }
    Ok(RejectionOutput { samples, proposals })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceEstimate {
    pub estimate: f64,
    /// Mean squared weight; grows without bound when the proposal's tails are too light.
    pub weight_second_moment: f64,
    pub max_weight: f64,
}

/// `(1/n) Σ g(x_i) p(x_i)/q(x_i)` with `x_i ~ q`.
pub fn importance_expectation<R, G, P, S, Q>(
    rng: &mut R,
    g: G,
    log_p: P,
    mut sample_q: S,
    log_q: Q,
    n: usize,
) -> Result<ImportanceEstimate>
where
    R: Rng + ?Sized,
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
    S: FnMut(&mut R) -> f64,
    Q: Fn(f64) -> f64,
{
    importance_with_weight(rng, g, |x| (log_p(x) - log_q(x)).exp(), &mut sample_q, n)
}

fn importance_with_weight<R, G, W, S>(rng: &mut R, g: G, weight: W, sample_q: &mut S, n: usize) -> Result<ImportanceEstimate>
where
    R: Rng + ?Sized,
    G: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
    S: FnMut(&mut R) -> f64,
{
    if n == 0 {
        return Err(SamplerError::Empty("draw"));
    }
    let (mut sum, mut sum_sq, mut max_weight) = (0.0, 0.0, 0.0f64);
    for _ in 0..n {
        let x = sample_q(rng);
        let w = weight(x);
        if !w.is_finite() {
            return Err(SamplerError::NonFiniteWeight { x });
        }
        sum += g(x) * w;
        sum_sq += w * w;
        max_weight = max_weight.max(w);
    }
    Ok(ImportanceEstimate {
        estimate: sum / n as f64,
        weight_second_moment: sum_sq / n as f64,
        max_weight,
    })
}

/// Shift of the exponential proposal used by [`normal_tail_probability`].
pub const TAIL_THRESHOLD: f64 = 5.0;

/// `Pr(x > 5)` for `x ~ N(0, 1)` with proposal `5 + Exp(1)`.
///
/// The weight `N(x; 0, 1) / q(x)` is evaluated in the simplified closed form
/// `exp(−x²/2 + x − 5)/√(2π)`.
pub fn normal_tail_probability<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<ImportanceEstimate> {
    let weight = |x: f64| (-0.5 * x * x + x - TAIL_THRESHOLD).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut sample = |r: &mut R| TAIL_THRESHOLD + exponential_inverse_cdf(r.sample(Open01), 1.0);
    importance_with_weight(rng, |_| 1.0, weight, &mut sample, n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfNormalisedEstimate {
    /// `Σ_k W_k h(x_k)` with normalised weights `W_k`.
    pub estimate: f64,
    /// `mean(w)`, an unbiased estimate of `E_f[w]`.
    pub z_hat: f64,
}

/// Self-normalised importance estimate of `E[h]` under `f(x) w(x) / E_f[w]`.
///
/// `sample` draws from the base distribution `f`; `weight` returns the product of the
/// per-site weight factors for a whole draw.
pub fn self_normalised_importance<R, X, S, W, H>(rng: &mut R, mut sample: S, weight: W, h: H, n: usize) -> Result<SelfNormalisedEstimate>
where
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> X,
    W: Fn(&X) -> f64,
    H: Fn(&X) -> f64,
{
    if n == 0 {
        return Err(SamplerError::Empty("draw"));
    }
    let (mut sum_w, mut sum_wh) = (0.0, 0.0);
    for draw in 0..n {
        let x = sample(rng);
        let w = weight(&x);
        if !(w.is_finite() && w >= 0.0) {
            return Err(SamplerError::NonFiniteDrawWeight { draw });
        }
        if w > 0.0 {
            sum_w += w;
            sum_wh += w * h(&x);
        }
    }
    if sum_w == 0.0 {
        return Err(SamplerError::ZeroWeights);
    }
    Ok(SelfNormalisedEstimate {
        estimate: sum_wh / sum_w,
        z_hat: sum_w / n as f64,
    })
}

/// Post-warm-up states of a Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<Vec<f64>>,
    pub warmup: usize,
    /// Accepted proposals over all iterations, warm-up included.
    pub accepted: usize,
    pub proposals: usize,
    pub seed: u64,
}

impl Trace {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposals as f64
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[d]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.samples.len() as f64;
        (0..self.dim()).map(|d| self.column(d).iter().sum::<f64>() / n).collect()
    }

    /// Sample covariance with divisor `n`.
    pub fn covariance(&self) -> Matrix {
        let d = self.dim();
        let m = self.mean();
        let n = self.samples.len() as f64;
        let mut c = Matrix::zeros(d, d);
        for s in &self.samples {
            for i in 0..d {
                for j in 0..d {
                    c[(i, j)] += (s[i] - m[i]) * (s[j] - m[j]) / n;
                }
            }
        }
        c
    }

    /// Effective sample size of every coordinate.
    pub fn ess(&self) -> Result<Vec<f64>> {
        (0..self.dim()).map(|d| ess(&self.column(d))).collect()
    }
}

/// Random-walk Metropolis-Hastings with isotropic Gaussian proposals of variance `vari`.
///
/// Runs `warmup + num_samples` iterations and keeps the last `num_samples` states; a
/// rejected proposal repeats the current state.
pub fn mh<P>(rng: &mut SeededRng, log_p_star: P, init: &[f64], num_samples: usize, vari: f64, warmup: usize) -> Result<Trace>
where
    P: Fn(&[f64]) -> f64,
{
    positive("vari", vari)?;
    if num_samples == 0 {
        return Err(SamplerError::Empty("sample"));
    }
    if init.is_empty() {
        return Err(SamplerError::Empty("dimension"));
    }
    let sd = vari.sqrt();
    let mut current = init.to_vec();
    let mut log_current = log_p_star(&current);
    if !log_current.is_finite() {
        return Err(SamplerError::NonFiniteInit);
    }
    let mut samples = Vec::with_capacity(num_samples);
    let mut accepted = 0;
    let mut proposal = vec![0.0; init.len()];
    for it in 0..warmup + num_samples {
        for (p, c) in proposal.iter_mut().zip(&current) {
            *p = c + sd * rng.standard_normal();
        }
        let log_proposal = log_p_star(&proposal);
        let u = rng.uniform();
        // NaN and −∞ targets are never accepted
        if u.ln() < log_proposal - log_current {
            current.copy_from_slice(&proposal);
            log_current = log_proposal;
            accepted += 1;
        }
        if it >= warmup {
            samples.push(current.clone());
        }
    }
    Ok(Trace {
        samples,
        warmup,
        accepted,
        proposals: warmup + num_samples,
        seed: rng.seed(),
    })
}

fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Prior variance of both Poisson-regression coefficients.
pub const POISSON_PRIOR_VARIANCE: f64 = 100.0;

/// Log posterior (up to a constant) of `y ~ Poisson(exp(αx + β))` with `N(0, 100)` priors.
///
/// The returned closure takes `[α, β]`.
pub fn poisson_regression_log_pstar(data: &[(f64, u64)]) -> impl Fn(&[f64]) -> f64 {
    let data: Vec<(f64, f64, f64)> = data.iter().map(|&(x, y)| (x, y as f64, ln_factorial(y))).collect();
    let log_prior = |t: f64| -0.5 * t * t / POISSON_PRIOR_VARIANCE - 0.5 * (2.0 * std::f64::consts::PI * POISSON_PRIOR_VARIANCE).ln();
    move |theta: &[f64]| {
        let (alpha, beta) = (theta[0], theta[1]);
        let mut lp = log_prior(alpha) + log_prior(beta);
        for &(x, y, lf) in &data {
            let eta = alpha * x + beta;
            lp += y * eta - eta.exp() - lf;
        }
        lp
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Restricted Boltzmann machine `p(v, h) ∝ exp(vᵀWh + aᵀv + bᵀh)` on binary units.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    w: Matrix,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl RbmModel {
    /// `w` is `visible × hidden`; `a` has one entry per visible unit, `b` per hidden unit.
    pub fn new(w: Matrix, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != w.rows() || b.len() != w.cols() {
            return Err(SamplerError::DimensionMismatch(format!(
                "W is {}×{}, a has {}, b has {}",
                w.rows(),
                w.cols(),
                a.len(),
                b.len()
            )));
        }
        if !w.is_finite() || !a.iter().chain(&b).all(|x| x.is_finite()) {
            return Err(NumericError::NonFinite.into());
        }
        Ok(RbmModel { w, a, b })
    }

    pub fn visible(&self) -> usize {
        self.a.len()
    }

    pub fn hidden(&self) -> usize {
        self.b.len()
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    fn check(&self, what: &str, x: &[u8], len: usize) -> Result<()> {
        if x.len() != len || x.iter().any(|&u| u > 1) {
            return Err(SamplerError::DimensionMismatch(format!(
                "{what} must be a binary vector of length {len}"
            )));
        }
        Ok(())
    }

    /// `p(h_j = 1 | v) = σ(Σ_i v_i W_ij + b_j)`.
    pub fn p_h_given_v(&self, v: &[u8]) -> Result<Vec<f64>> {
        self.check("v", v, self.visible())?;
        Ok((0..self.hidden())
            .map(|j| sigmoid(self.hidden_input(v, j)))
            .collect())
    }

    /// `p(v_i = 1 | h) = σ(Σ_j W_ij h_j + a_i)`.
    pub fn p_v_given_h(&self, h: &[u8]) -> Result<Vec<f64>> {
        self.check("h", h, self.hidden())?;
        Ok((0..self.visible())
            .map(|i| {
                let s: f64 = self.w.row(i).iter().zip(h).map(|(w, &x)| w * x as f64).sum();
                sigmoid(s + self.a[i])
            })
            .collect())
    }

    fn hidden_input(&self, v: &[u8], j: usize) -> f64 {
        (0..self.visible()).map(|i| v[i] as f64 * self.w[(i, j)]).sum::<f64>() + self.b[j]
    }

    /// Unnormalised `log p(v) = aᵀv + Σ_j softplus(Σ_i v_i W_ij + b_j)`.
    pub fn visible_unnorm_logpmf(&self, v: &[u8]) -> Result<f64> {
        self.check("v", v, self.visible())?;
        let av: f64 = self.a.iter().zip(v).map(|(a, &x)| a * x as f64).sum();
        Ok(av + (0..self.hidden()).map(|j| softplus(self.hidden_input(v, j))).sum::<f64>())
    }
}

pub fn rbm_visible_unnorm_logpmf(model: &RbmModel, v: &[u8]) -> Result<f64> {
    model.visible_unnorm_logpmf(v)
}

fn bernoulli_vector<R: Rng + ?Sized>(rng: &mut R, p: &[f64]) -> Vec<u8> {
    p.iter().map(|&q| u8::from(rng.sample::<f64, _>(Open01) < q)).collect()
}

/// Block Gibbs sampling: each sweep draws all of `h` given `v`, then all of `v` given `h`.
///
/// Returns the visible state after every sweep.
pub fn gibbs_rbm<R: Rng + ?Sized>(rng: &mut R, model: &RbmModel, init_v: &[u8], sweeps: usize) -> Result<Vec<Vec<u8>>> {
    model.check("v", init_v, model.visible())?;
    let mut v = init_v.to_vec();
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        let h = bernoulli_vector(rng, &model.p_h_given_v(&v)?);
        v = bernoulli_vector(rng, &model.p_v_given_h(&h)?);
        out.push(v.clone());
    }
    Ok(out)
}

/// Deviations from the mean and their sum of squares.
fn centred(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    if x.len() < 2 {
        return Err(SamplerError::Empty("pair of samples"));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>();
    if !(c0 > 0.0) {
        return Err(SamplerError::ConstantSeries);
    }
    Ok((d, c0))
}

fn lagged(d: &[f64], c0: f64, k: usize) -> f64 {
    d[..d.len() - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / c0
}

/// Autocorrelation `ρ̂(k)` for `k = 0..=max_lag` with divisor `S` at every lag.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let (d, c0) = centred(x)?;
    Ok((0..=max_lag.min(d.len() - 1)).map(|k| lagged(&d, c0, k)).collect())
}

/// `S / (1 + 2 Σ_k ρ̂(k))`, summing lags until the first negative autocorrelation.
pub fn ess(x: &[f64]) -> Result<f64> {
    let (d, c0) = centred(x)?;
    let sum: f64 = (1..d.len()).map(|k| lagged(&d, c0, k)).take_while(|r| *r >= 0.0).sum();
    Ok(d.len() as f64 / (1.0 + 2.0 * sum))
}
