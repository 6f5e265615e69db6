//! Logged-data types and the point estimators: IPS, clipped IPS (cIPS),
//! double-clipped IPS (dcIPS), and the logging-mean baseline.
//!
//! All estimators are pure functions over an immutable [`Dataset`] and an
//! aligned sequence of [`ImportanceWeight`]s. They share a single summation
//! path in record order, so the limit identities hold bit-for-bit:
//! `dcips(U, unbounded) == cips(U)`, `cips(U >= max w) == ips`, and
//! `dcips(1, 1) == logging_mean`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::float::Float;
use crate::Result;

/// One logged interaction: who saw what, what was played, what came back.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord<F> {
    /// Opaque context reference (e.g. round index or tabular context index).
    pub context_id: u64,
    /// Chosen action, 0-based.
    pub action: usize,
    /// Observed reward, non-negative.
    pub reward: F,
    /// Probability the logging policy assigned to the chosen action, in (0, 1].
    pub logging_propensity: F,
    /// Target propensity of the chosen action, filled at evaluation time.
    pub target_propensity_cache: Option<F>,
}

impl<F: Float> LogRecord<F> {
    pub fn new(context_id: u64, action: usize, reward: F, logging_propensity: F) -> Result<Self> {
        if !(reward >= F::zero()) {
            return Err(Error::InvalidRecord(format!(
                "reward {reward} must be non-negative"
            )));
        }
        if !(logging_propensity > F::zero() && logging_propensity <= F::one()) {
            return Err(Error::InvalidRecord(format!(
                "logging propensity {logging_propensity} must lie in (0, 1]"
            )));
        }
        Ok(Self {
            context_id,
            action,
            reward,
            logging_propensity,
            target_propensity_cache: None,
        })
    }
}

/// An ordered, immutable collection of logged records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset<F> {
    records: Vec<LogRecord<F>>,
}

impl<F: Float> Dataset<F> {
    pub fn new(records: Vec<LogRecord<F>>) -> Self {
        Self { records }
    }

    /// Builds a dataset from `(reward, logging_propensity)` pairs, validating
    /// each record. Context ids are the record indices, actions all 0.
    pub fn from_rewards_and_propensities(pairs: &[(F, F)]) -> Result<Self> {
        let records = pairs
            .iter()
            .enumerate()
            .map(|(i, &(r, p))| LogRecord::new(i as u64, 0, r, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records })
    }

    pub fn records(&self) -> &[LogRecord<F>] {
        &self.records
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// A propensity ratio `w = π(y|x) / π₀(y|x)`, dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceWeight<F>(F);

impl<F: Float> ImportanceWeight<F> {
    pub fn value(&self) -> F {
        self.0
    }
}

/// Computes the importance weight `target_prop / logging_prop`.
///
/// A zero target propensity yields weight 0 (the target never plays the
/// action); a non-positive logging propensity breaks the overlap assumption
/// and is an error.
pub fn importance_weight<F: Float>(target_prop: F, logging_prop: F) -> Result<ImportanceWeight<F>> {
    if !(logging_prop > F::zero()) {
        return Err(Error::OverlapViolation {
            logging_propensity: logging_prop.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(ImportanceWeight(target_prop / logging_prop))
}

/// One clipping constant: a finite value or no clipping at all.
///
/// The unbounded case is an explicit sentinel rather than a large float so
/// that `dcips(U, unbounded)` takes exactly the same arithmetic path as
/// `cips(U)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClipBound<F> {
    Finite(F),
    Unbounded,
}

impl<F: Float> ClipBound<F> {
    pub fn is_unbounded(&self) -> bool {
        matches!(self, ClipBound::Unbounded)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let ClipBound::Finite(v) = self {
            if !v.is_finite() || *v < F::one() {
                return Err(Error::InvalidClip(format!("{name} = {v} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Upper constant `U` and lower constant `L` of the two-sided clip
/// `max(min(w, U), 1/L)`. Both must be >= 1 when finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipConfig<F> {
    pub upper: ClipBound<F>,
    pub lower: ClipBound<F>,
}

impl<F: Float> ClipConfig<F> {
    pub fn new(upper: ClipBound<F>, lower: ClipBound<F>) -> Result<Self> {
        upper.validate("upper clipping constant U")?;
        lower.validate("lower clipping constant L")?;
        Ok(Self { upper, lower })
    }

    /// No clipping on either side (plain IPS).
    pub fn unclipped() -> Self {
        Self {
            upper: ClipBound::Unbounded,
            lower: ClipBound::Unbounded,
        }
    }

    /// Upper clipping only (cIPS).
    pub fn upper_only(upper: F) -> Result<Self> {
        Self::new(ClipBound::Finite(upper), ClipBound::Unbounded)
    }

    /// Both sides finite (dcIPS).
    pub fn two_sided(upper: F, lower: F) -> Result<Self> {
        Self::new(ClipBound::Finite(upper), ClipBound::Finite(lower))
    }

    /// Effective weight `max(min(w, U), 1/L)`, with the boundary convention
    /// that `w == U` and `w == 1/L` are left untouched.
    pub fn apply(&self, weight: F) -> F {
        let mut w = weight;
        if let ClipBound::Finite(u) = self.upper {
            if w > u {
                w = u;
            }
        }
        if let ClipBound::Finite(l) = self.lower {
            let floor = F::one() / l;
            if w < floor {
                w = floor;
            }
        }
        w
    }
}

/// Per-record clipping counts for an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClipStats {
    pub clipped_above: usize,
    pub clipped_below: usize,
    pub unclipped: usize,
}

/// A point estimate of the target policy's expected reward, with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<F> {
    pub value: F,
    pub n_used: usize,
    pub clip_stats: ClipStats,
}

fn check_inputs<F: Float>(dataset: &Dataset<F>, weights: &[ImportanceWeight<F>]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if weights.len() != dataset.n() {
        return Err(Error::LengthMismatch {
            weights: weights.len(),
            records: dataset.n(),
        });
    }
    Ok(())
}

/// Shared reference path: `(1/n) Σ rᵢ · max(min(wᵢ, U), 1/L)`, summed in
/// record order. All three estimators go through here so the exact-equality
/// identities between them are a matter of which bounds are active.
fn clipped_estimate<F: Float>(
    dataset: &Dataset<F>,
    weights: &[ImportanceWeight<F>],
    clip: ClipConfig<F>,
) -> Result<Estimate<F>> {
    check_inputs(dataset, weights)?;
    let mut stats = ClipStats::default();
    let mut sum = F::zero();
    for (record, weight) in dataset.records().iter().zip(weights) {
        let mut w = weight.value();
        let mut clipped = false;
        if let ClipBound::Finite(u) = clip.upper {
            if w > u {
                w = u;
                stats.clipped_above += 1;
                clipped = true;
            }
        }
        if let ClipBound::Finite(l) = clip.lower {
            let floor = F::one() / l;
            if w < floor {
                w = floor;
                stats.clipped_below += 1;
                clipped = true;
            }
        }
        if !clipped {
            stats.unclipped += 1;
        }
        sum = sum + record.reward * w;
    }
    Ok(Estimate {
        value: sum / F::from_count(dataset.n()),
        n_used: dataset.n(),
        clip_stats: stats,
    })
}

/// Standard inverse propensity scoring: `(1/n) Σ rᵢ·wᵢ`.
pub fn ips<F: Float>(dataset: &Dataset<F>, weights: &[ImportanceWeight<F>]) -> Result<Estimate<F>> {
    clipped_estimate(dataset, weights, ClipConfig::unclipped())
}

/// Clipped IPS: `(1/n) Σ rᵢ·min(wᵢ, U)`.
pub fn cips<F: Float>(
    dataset: &Dataset<F>,
    weights: &[ImportanceWeight<F>],
    upper: ClipBound<F>,
) -> Result<Estimate<F>> {
    let clip = ClipConfig::new(upper, ClipBound::Unbounded)?;
    clipped_estimate(dataset, weights, clip)
}

/// Double-clipped IPS: `(1/n) Σ rᵢ·max(min(wᵢ, U), 1/L)`.
pub fn dcips<F: Float>(
    dataset: &Dataset<F>,
    weights: &[ImportanceWeight<F>],
    clip: ClipConfig<F>,
) -> Result<Estimate<F>> {
    clip.upper.validate("upper clipping constant U")?;
    clip.lower.validate("lower clipping constant L")?;
    clipped_estimate(dataset, weights, clip)
}

/// Mean of the logged rewards, the `U = L = 1` limit of dcIPS.
pub fn logging_mean<F: Float>(dataset: &Dataset<F>) -> Result<Estimate<F>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = F::zero();
    for record in dataset.records() {
        sum = sum + record.reward;
    }
    Ok(Estimate {
        value: sum / F::from_count(dataset.n()),
        n_used: dataset.n(),
        clip_stats: ClipStats {
            clipped_above: 0,
            clipped_below: 0,
            unclipped: dataset.n(),
        },
    })
}
