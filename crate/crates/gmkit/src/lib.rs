//! Inference toolkit for small probabilistic graphical models.
//!
//! - [`graph`]: DAG and UGM structure queries (d-separation, blankets, I-maps).
//! - [`factor`]: dense discrete factors and variable elimination.
//! - [`message_passing`]: sum-product and max-sum on factor trees.
//! - [`sequential`]: discrete HMM inference and the scalar Kalman filter.
//! - [`learning`]: CPT estimation, Gaussian estimators, score matching.
//! - [`numerics`]: dense linear algebra and gradient kernels.
//! - [`samplers`]: seeded Monte Carlo samplers and diagnostics.
//! - [`variational`]: Gaussian mean-field coordinate ascent.

pub mod factor;
pub mod graph;
pub mod learning;
pub mod message_passing;
pub mod numerics;
pub mod samplers;
pub mod sequential;
pub mod variational;
