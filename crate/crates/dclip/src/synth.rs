//! Synthetic bandit environments and logged-data generation.
//!
//! Two substrates:
//!
//! - [`GaussianFeatureEnv`]: the continuous-feature softmax bandit used by the
//!   sweep harness. Each round draws a fresh feature matrix (one Gaussian
//!   feature vector per action, centred on the action's one-hot encoding), the
//!   logging policy samples an action from a softmax over linear scores, and
//!   the reward is 1 iff the chosen action's features score positively against
//!   a fixed reward weight vector.
//! - [`TabularEnvironment`]: finite contexts and actions with exact
//!   probabilities and expected rewards, the substrate for the exact oracles
//!   in [`crate::oracle`] and for sampled cross-checks against them.
//!
//! All randomness flows through [`Seed`]: a master seed plus a stream id,
//! mapped onto independent ChaCha streams so repetitions are reproducible and
//! order-insensitive.

use rand::distr::{Distribution, StandardUniform};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::error::Error;
use crate::estimators::{importance_weight, Dataset, ImportanceWeight, LogRecord};
use crate::float::Float;
use crate::Result;

/// Deterministic PRNG addressing: `(master_seed, stream_id)` fully determines
/// the generator state. Repetition `k` of an experiment uses stream `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl Seed {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            stream_id: 0,
        }
    }

    /// Same master seed, different independent stream.
    pub fn stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// A linear policy: softmax action probabilities over scores `Φβ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmaxPolicy<F> {
    weights: Vec<F>,
}

impl<F: Float> LinearSoftmaxPolicy<F> {
    pub fn new(weights: Vec<F>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// One feature vector per action, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<F> {
    rows: Vec<Vec<F>>,
}

impl<F: Float> FeatureMatrix<F> {
    pub fn new(rows: Vec<Vec<F>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::DimensionMismatch("feature matrix has no rows".into()));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(
                "feature matrix rows have unequal lengths".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<F>] {
        &self.rows
    }

    pub fn num_actions(&self) -> usize {
        self.rows.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.rows[0].len()
    }
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Softmax action probabilities `pⱼ = exp(φⱼᵀβ) / Σₖ exp(φₖᵀβ)`.
///
/// Computed in max-subtracted form, so the output is finite and strictly
/// positive for any finite scores.
pub fn softmax_propensities<F: Float>(
    policy: &LinearSoftmaxPolicy<F>,
    features: &FeatureMatrix<F>,
) -> Result<Vec<F>> {
    if policy.dim() != features.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "policy dimension {} vs feature dimension {}",
            policy.dim(),
            features.feature_dim()
        )));
    }
    let scores: Vec<F> = features
        .rows()
        .iter()
        .map(|row| dot(row, policy.weights()))
        .collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("softmax scores".into()));
    }
    let max = scores
        .iter()
        .copied()
        .fold(F::neg_infinity(), |m, s| if s > m { s } else { m });
    let exps: Vec<F> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// The stochastic-feature multi-armed bandit: Gaussian action features around
/// one-hot means, binary reward from a linear threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFeatureEnv<F> {
    pub num_actions: usize,
    pub feature_dim: usize,
    pub sigma: F,
    pub reward_weights: Vec<F>,
}

impl<F: Float> GaussianFeatureEnv<F> {
    pub fn new(num_actions: usize, sigma: F, reward_weights: Vec<F>) -> Result<Self> {
        if num_actions < 2 {
            return Err(Error::InvalidEnvironment(
                "num_actions must be at least 2".into(),
            ));
        }
        if !(sigma > F::zero()) {
            return Err(Error::InvalidEnvironment("sigma must be positive".into()));
        }
        if reward_weights.len() != num_actions {
            return Err(Error::InvalidEnvironment(format!(
                "reward weight dimension {} vs num_actions {}",
                reward_weights.len(),
                num_actions
            )));
        }
        Ok(Self {
            num_actions,
            feature_dim: num_actions,
            sigma,
            reward_weights,
        })
    }
}

/// The 8-action benchmark configuration: σ = 1, reward weights
/// `[0, 0.5, 0, 0.5, 0, 0, 0, 0]`, logging weights `[1/9, …, 8/9]` and the
/// flipped target weights `[8/9, …, 1/9]`.
pub fn eight_action_benchmark<F: Float>() -> (
    GaussianFeatureEnv<F>,
    LinearSoftmaxPolicy<F>,
    LinearSoftmaxPolicy<F>,
) {
    let num_actions = 8;
    let reward_weights: Vec<F> = [0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]
        .iter()
        .map(|&v| F::cast(v))
        .collect();
    let env = GaussianFeatureEnv::new(num_actions, F::one(), reward_weights).unwrap();
    let logging: Vec<F> = (1..=num_actions)
        .map(|k| F::from_count(k) / F::cast(9.0))
        .collect();
    let target: Vec<F> = logging.iter().rev().copied().collect();
    (
        env,
        LinearSoftmaxPolicy::new(logging),
        LinearSoftmaxPolicy::new(target),
    )
}

fn sample_features_with<F>(env: &GaussianFeatureEnv<F>, rng: &mut ChaCha8Rng) -> FeatureMatrix<F>
where
    F: Float,
    StandardNormal: Distribution<F>,
{
    let rows = (0..env.num_actions)
        .map(|action| {
            (0..env.feature_dim)
                .map(|k| {
                    let mean = if k == action { F::one() } else { F::zero() };
                    let normal = Normal::new(mean, env.sigma).expect("valid normal");
                    normal.sample(rng)
                })
                .collect()
        })
        .collect();
    FeatureMatrix { rows }
}

/// Draws one feature matrix: `φⱼ ~ Normal(one_hot(j), σ²·I)`.
pub fn sample_features<F>(env: &GaussianFeatureEnv<F>, seed: Seed) -> FeatureMatrix<F>
where
    F: Float,
    StandardNormal: Distribution<F>,
{
    sample_features_with(env, &mut seed.rng())
}

/// Binary reward: 1 if `φᵀβ_reward > 0`, else 0. Ties (exactly 0) give 0.
pub fn realize_reward<F: Float>(features_row: &[F], reward_weights: &[F]) -> F {
    if dot(features_row, reward_weights) > F::zero() {
        F::one()
    } else {
        F::zero()
    }
}

fn sample_index<F>(probs: &[F], rng: &mut ChaCha8Rng) -> usize
where
    F: Float,
    StandardUniform: Distribution<F>,
{
    let u: F = rng.random();
    let mut cumulative = F::zero();
    for (i, &p) in probs.iter().enumerate() {
        cumulative = cumulative + p;
        if u < cumulative {
            return i;
        }
    }
    probs.len() - 1
}

/// One simulated round with everything needed to re-evaluate propensities
/// later: the realized feature matrix and the full logging propensity vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRound<F> {
    pub features: FeatureMatrix<F>,
    pub action: usize,
    pub reward: F,
    pub logging_propensities: Vec<F>,
}

/// A simulated log: the dataset plus per-round feature matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog<F> {
    rounds: Vec<LoggedRound<F>>,
}

impl<F: Float> SimLog<F> {
    pub fn new(rounds: Vec<LoggedRound<F>>) -> Self {
        Self { rounds }
    }

    pub fn rounds(&self) -> &[LoggedRound<F>] {
        &self.rounds
    }

    pub fn n(&self) -> usize {
        self.rounds.len()
    }

    /// Flattens into the estimator-facing dataset; the logging propensity per
    /// record is the chosen action's entry of the stored vector.
    pub fn to_dataset(&self) -> Result<Dataset<F>> {
        let records = self
            .rounds
            .iter()
            .enumerate()
            .map(|(i, round)| {
                LogRecord::new(
                    i as u64,
                    round.action,
                    round.reward,
                    round.logging_propensities[round.action],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::new(records))
    }
}

/// Plays the bandit for `n` rounds under the logging policy. Deterministic
/// given the seed.
pub fn simulate<F>(
    env: &GaussianFeatureEnv<F>,
    logging_policy: &LinearSoftmaxPolicy<F>,
    n: usize,
    seed: Seed,
) -> Result<SimLog<F>>
where
    F: Float,
    StandardNormal: Distribution<F>,
    StandardUniform: Distribution<F>,
{
    if n == 0 {
        return Err(Error::InvalidConfig("simulation needs n >= 1 rounds".into()));
    }
    let mut rng = seed.rng();
    let mut rounds = Vec::with_capacity(n);
    for _ in 0..n {
        let features = sample_features_with(env, &mut rng);
        let propensities = softmax_propensities(logging_policy, &features)?;
        let action = sample_index(&propensities, &mut rng);
        let reward = realize_reward(&features.rows()[action], &env.reward_weights);
        rounds.push(LoggedRound {
            features,
            action,
            reward,
            logging_propensities: propensities,
        });
    }
    Ok(SimLog::new(rounds))
}

/// Target propensity of each logged action under `target_policy`, evaluated
/// on the stored feature matrices.
pub fn evaluate_target_propensities<F: Float>(
    log: &SimLog<F>,
    target_policy: &LinearSoftmaxPolicy<F>,
) -> Result<Vec<F>> {
    log.rounds()
        .iter()
        .map(|round| {
            let probs = softmax_propensities(target_policy, &round.features)?;
            Ok(probs[round.action])
        })
        .collect()
}

/// Importance weights `π(yᵢ|Φᵢ) / π₀(yᵢ|Φᵢ)` for every logged round.
pub fn importance_weights<F: Float>(
    log: &SimLog<F>,
    target_policy: &LinearSoftmaxPolicy<F>,
) -> Result<Vec<ImportanceWeight<F>>> {
    let target_props = evaluate_target_propensities(log, target_policy)?;
    log.rounds()
        .iter()
        .zip(target_props)
        .map(|(round, target_prop)| {
            importance_weight(target_prop, round.logging_propensities[round.action])
        })
        .collect()
}

/// Monte Carlo estimate of the policy's true expected reward
/// `E_Φ[Σⱼ π(j|Φ)·1{φⱼᵀβ_reward > 0}]`, with the standard error of the mean.
pub fn true_reward_mc<F>(
    env: &GaussianFeatureEnv<F>,
    policy: &LinearSoftmaxPolicy<F>,
    num_samples: usize,
    seed: Seed,
) -> Result<(F, F)>
where
    F: Float,
    StandardNormal: Distribution<F>,
{
    if num_samples == 0 {
        return Err(Error::InvalidConfig("true_reward_mc needs samples".into()));
    }
    let mut rng = seed.rng();
    let mut sum = F::zero();
    let mut sum_sq = F::zero();
    for _ in 0..num_samples {
        let features = sample_features_with(env, &mut rng);
        let probs = softmax_propensities(policy, &features)?;
        let mut value = F::zero();
        for (row, &p) in features.rows().iter().zip(&probs) {
            value = value + p * realize_reward(row, &env.reward_weights);
        }
        sum = sum + value;
        sum_sq = sum_sq + value * value;
    }
    let k = F::from_count(num_samples);
    let mean = sum / k;
    let variance = (sum_sq / k - mean * mean).max(F::zero());
    let se = if num_samples > 1 {
        (variance / F::from_count(num_samples - 1)).sqrt()
    } else {
        F::zero()
    };
    Ok((mean, se))
}

/// Finite contexts and actions with exact probabilities and expected rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularEnvironment<F> {
    pub context_probs: Vec<F>,
    pub logging_table: Vec<Vec<F>>,
    pub target_table: Vec<Vec<F>>,
    pub expected_rewards: Vec<Vec<F>>,
}

fn check_probability_vector<F: Float>(probs: &[F], what: &str) -> Result<()> {
    if probs.iter().any(|&p| p < F::zero()) {
        return Err(Error::InvalidEnvironment(format!(
            "{what} has a negative entry"
        )));
    }
    let total: F = probs.iter().copied().sum();
    if (total - F::one()).abs() > F::cast(1e-12) {
        return Err(Error::InvalidEnvironment(format!(
            "{what} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

impl<F: Float> TabularEnvironment<F> {
    pub fn new(
        context_probs: Vec<F>,
        logging_table: Vec<Vec<F>>,
        target_table: Vec<Vec<F>>,
        expected_rewards: Vec<Vec<F>>,
    ) -> Result<Self> {
        let num_contexts = context_probs.len();
        if num_contexts == 0 {
            return Err(Error::InvalidEnvironment("no contexts".into()));
        }
        check_probability_vector(&context_probs, "context distribution")?;
        for (name, table) in [("logging", &logging_table), ("target", &target_table)] {
            if table.len() != num_contexts {
                return Err(Error::InvalidEnvironment(format!(
                    "{name} table has {} rows for {num_contexts} contexts",
                    table.len()
                )));
            }
            for (x, row) in table.iter().enumerate() {
                check_probability_vector(row, &format!("{name} propensities for context {x}"))?;
            }
        }
        let num_actions = logging_table[0].len();
        if logging_table.iter().any(|r| r.len() != num_actions)
            || target_table.iter().any(|r| r.len() != num_actions)
            || expected_rewards.len() != num_contexts
            || expected_rewards.iter().any(|r| r.len() != num_actions)
        {
            return Err(Error::InvalidEnvironment(
                "tables have inconsistent dimensions".into(),
            ));
        }
        if expected_rewards.iter().flatten().any(|&r| r < F::zero()) {
            return Err(Error::InvalidEnvironment(
                "expected rewards must be non-negative".into(),
            ));
        }
        // full support: π₀ > 0 wherever π > 0
        for x in 0..num_contexts {
            for y in 0..num_actions {
                if target_table[x][y] > F::zero() && !(logging_table[x][y] > F::zero()) {
                    return Err(Error::OverlapViolation {
                        logging_propensity: logging_table[x][y].to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(Self {
            context_probs,
            logging_table,
            target_table,
            expected_rewards,
        })
    }

    /// The single-context worked example: π₀ = (0.9, 0.1), π = (0.5, 0.5),
    /// both expected rewards 1.
    pub fn two_action_example() -> Self {
        Self::new(
            vec![F::one()],
            vec![vec![F::cast(0.9), F::cast(0.1)]],
            vec![vec![F::cast(0.5), F::cast(0.5)]],
            vec![vec![F::one(), F::one()]],
        )
        .unwrap()
    }

    pub fn num_contexts(&self) -> usize {
        self.context_probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.logging_table[0].len()
    }
}

/// Samples logged data from the tabular environment: context from
/// `context_probs`, action from the logging table, reward from
/// `Bernoulli(E[r|x,y])`. Deterministic given the seed.
pub fn tabular_simulate<F>(env: &TabularEnvironment<F>, n: usize, seed: Seed) -> Result<Dataset<F>>
where
    F: Float,
    StandardUniform: Distribution<F>,
{
    if n == 0 {
        return Err(Error::InvalidConfig("simulation needs n >= 1 rounds".into()));
    }
    if env.expected_rewards.iter().flatten().any(|&r| r > F::one()) {
        return Err(Error::InvalidConfig(
            "Bernoulli reward realization needs expected rewards in [0, 1]".into(),
        ));
    }
    let mut rng = seed.rng();
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let context = sample_index(&env.context_probs, &mut rng);
        let action = sample_index(&env.logging_table[context], &mut rng);
        let u: F = rng.random();
        let reward = if u < env.expected_rewards[context][action] {
            F::one()
        } else {
            F::zero()
        };
        records.push(LogRecord::new(
            context as u64,
            action,
            reward,
            env.logging_table[context][action],
        )?);
    }
    Ok(Dataset::new(records))
}

/// Importance weights for a tabular dataset, looked up from the environment's
/// target table by the record's context id.
pub fn tabular_importance_weights<F: Float>(
    env: &TabularEnvironment<F>,
    dataset: &Dataset<F>,
) -> Result<Vec<ImportanceWeight<F>>> {
    dataset
        .records()
        .iter()
        .map(|record| {
            let x = record.context_id as usize;
            importance_weight(env.target_table[x][record.action], record.logging_propensity)
        })
        .collect()
}
