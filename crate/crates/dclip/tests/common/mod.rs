//! Shared generators for the integration and acceptance suites.

use dclip::estimators::{importance_weight, Dataset, ImportanceWeight};
use dclip::synth::TabularEnvironment;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random dataset plus aligned weights: rewards in [0, 1], logging
/// propensities in (0, 1], weights spanning several orders of magnitude
/// (including exact zeros from zero target propensities).
pub fn random_dataset_and_weights(
    rng: &mut ChaCha8Rng,
    max_len: usize,
) -> (Dataset<f64>, Vec<ImportanceWeight<f64>>) {
    let n = rng.random_range(1..=max_len);
    let mut pairs = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let reward: f64 = rng.random();
        let logging_prop: f64 = rng.random_range(1e-3..=1.0);
        let target_prop: f64 = if rng.random_bool(0.1) {
            0.0
        } else {
            rng.random_range(0.0..=1.0)
        };
        pairs.push((reward, logging_prop));
        weights.push(importance_weight(target_prop, logging_prop).unwrap());
    }
    (
        Dataset::from_rewards_and_propensities(&pairs).unwrap(),
        weights,
    )
}

/// Random tabular environment with strictly positive policies (full support
/// both ways): up to 5 contexts, up to 8 actions, rewards in [0, 1].
pub fn random_tabular_env(rng: &mut ChaCha8Rng) -> TabularEnvironment<f64> {
    let num_contexts = rng.random_range(1..=5);
    let num_actions = rng.random_range(2..=8);
    let random_simplex = |rng: &mut ChaCha8Rng, len: usize| {
        let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect::<Vec<f64>>()
    };
    let context_probs = random_simplex(rng, num_contexts);
    let logging_table: Vec<Vec<f64>> = (0..num_contexts)
        .map(|_| random_simplex(rng, num_actions))
        .collect();
    let target_table: Vec<Vec<f64>> = (0..num_contexts)
        .map(|_| random_simplex(rng, num_actions))
        .collect();
    let expected_rewards: Vec<Vec<f64>> = (0..num_contexts)
        .map(|_| (0..num_actions).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    TabularEnvironment::new(context_probs, logging_table, target_table, expected_rewards).unwrap()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
