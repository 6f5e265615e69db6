//! Counterfactual off-policy evaluation for contextual bandit policies.
//!
//! Estimates the expected reward of a *target* policy from data logged under a
//! different *logging* policy, using inverse propensity scoring (IPS) and its
//! clipped variants:
//!
//! - [`estimators::ips`] — the unbiased reweighted-mean estimator,
//! - [`estimators::cips`] — upper clipping `min(w, U)`, lower variance at the
//!   cost of a downward bias,
//! - [`estimators::dcips`] — two-sided clipping `max(min(w, U), 1/L)`, which
//!   compensates part of that downward bias with an upward term.
//!
//! The [`oracle`] module computes estimator expectations and both bias
//! decompositions exactly on finite tabular environments, the [`synth`] module
//! generates logged bandit data (a Gaussian-feature softmax bandit and a
//! tabular sampler), and the [`harness`] module runs repeated-simulation
//! sweeps over clipping constants with a bias²/variance/MSE decomposition.
//!
//! All numeric code is generic over the scalar type via [`float::Float`]
//! (`f32` or `f64`); the aliases below fix `f64`, which is what the `dclip`
//! CLI uses.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod float;
pub mod harness;
pub mod oracle;
pub mod synth;

pub use error::Error;
pub use float::Float;

/// Convenience aliases at `f64`, the precision used by the CLI.
pub type LogRecord64 = estimators::LogRecord<f64>;
pub type Dataset64 = estimators::Dataset<f64>;
pub type ImportanceWeight64 = estimators::ImportanceWeight<f64>;
pub type ClipBound64 = estimators::ClipBound<f64>;
pub type ClipConfig64 = estimators::ClipConfig<f64>;
pub type Estimate64 = estimators::Estimate<f64>;
pub type LinearSoftmaxPolicy64 = synth::LinearSoftmaxPolicy<f64>;
pub type GaussianFeatureEnv64 = synth::GaussianFeatureEnv<f64>;
pub type TabularEnvironment64 = synth::TabularEnvironment<f64>;
pub type FeatureMatrix64 = synth::FeatureMatrix<f64>;
pub type BiasReport64 = oracle::BiasReport<f64>;
pub type SweepConfig64 = harness::SweepConfig<f64>;
pub type SweepResult64 = harness::SweepResult<f64>;

/// Library result type.
pub type Result<T> = std::result::Result<T, Error>;
