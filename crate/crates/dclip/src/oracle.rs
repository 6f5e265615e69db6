//! Exact enumeration oracles on tabular environments.
//!
//! With finite contexts and actions every expectation is a finite sum, so the
//! expected value of each estimator and the closed-form bias of cIPS and
//! dcIPS can be computed to floating-point accuracy. These oracles are the
//! reference the sampled estimators and the sweep harness are checked
//! against.
//!
//! Both bias decompositions are enumerated under the logging distribution
//! (`E_{y~π₀}[(clip(w) − w)·E[r|x,y]]`), which is algebraically identical to
//! the target-distribution form under full support but stays well defined on
//! cells where the target probability is zero.

use crate::error::Error;
use crate::estimators::{ClipBound, ClipConfig};
use crate::float::Float;
use crate::synth::TabularEnvironment;
use crate::Result;

/// Per-(context, action) bias contribution, already weighted by
/// `P(x)·π₀(y|x)·E[r|x,y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellContribution<F> {
    pub context: usize,
    pub action: usize,
    pub upper: F,
    pub lower: F,
}

/// The bias of a clipped estimator, split into the upper-clipping term
/// (always <= 0) and the lower-clipping term (always >= 0).
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport<F> {
    pub bias_total: F,
    pub upper_term: F,
    pub lower_term: F,
    pub per_cell: Option<Vec<CellContribution<F>>>,
}

/// A per-(context, action) real table, dimensioned like the environment.
pub type PolicyTable<F> = Vec<Vec<F>>;

fn check_target<F: Float>(env: &TabularEnvironment<F>, target: &[Vec<F>]) -> Result<()> {
    if target.len() != env.num_contexts()
        || target.iter().any(|row| row.len() != env.num_actions())
    {
        return Err(Error::DimensionMismatch(
            "target table does not match environment dimensions".into(),
        ));
    }
    for x in 0..env.num_contexts() {
        for y in 0..env.num_actions() {
            if target[x][y] > F::zero() && !(env.logging_table[x][y] > F::zero()) {
                return Err(Error::OverlapViolation {
                    logging_propensity: env.logging_table[x][y].to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(())
}

/// Exact expectation of the single-sample clipped estimate:
/// `E_x E_{y~π₀}[E[r|x,y]·max(min(w, U), 1/L)]` with `w = π(y|x)/π₀(y|x)`.
///
/// By linearity this is also the expectation of the n-sample average. With
/// both bounds unbounded it reduces to the true target reward (IPS is
/// unbiased).
pub fn exact_expected_estimate<F: Float>(
    env: &TabularEnvironment<F>,
    target: &PolicyTable<F>,
    clip: ClipConfig<F>,
) -> Result<F> {
    check_target(env, target)?;
    let mut total = F::zero();
    for x in 0..env.num_contexts() {
        for y in 0..env.num_actions() {
            let logging_prop = env.logging_table[x][y];
            if !(logging_prop > F::zero()) {
                continue; // never logged, never enters the estimate
            }
            let w = target[x][y] / logging_prop;
            total = total
                + env.context_probs[x] * logging_prop * env.expected_rewards[x][y] * clip.apply(w);
        }
    }
    Ok(total)
}

/// True expected reward of the target policy:
/// `Σₓ P(x) Σᵧ π(y|x)·E[r|x,y]`.
pub fn exact_true_reward<F: Float>(env: &TabularEnvironment<F>, target: &PolicyTable<F>) -> F {
    let mut total = F::zero();
    for x in 0..env.num_contexts() {
        for y in 0..env.num_actions() {
            total = total + env.context_probs[x] * target[x][y] * env.expected_rewards[x][y];
        }
    }
    total
}

fn bias_terms<F: Float>(
    env: &TabularEnvironment<F>,
    target: &PolicyTable<F>,
    clip: ClipConfig<F>,
    with_cells: bool,
) -> Result<BiasReport<F>> {
    check_target(env, target)?;
    let mut upper_term = F::zero();
    let mut lower_term = F::zero();
    let mut cells = Vec::new();
    for x in 0..env.num_contexts() {
        for y in 0..env.num_actions() {
            let logging_prop = env.logging_table[x][y];
            if !(logging_prop > F::zero()) {
                continue;
            }
            let w = target[x][y] / logging_prop;
            let mass = env.context_probs[x] * logging_prop * env.expected_rewards[x][y];
            let mut upper = F::zero();
            let mut lower = F::zero();
            if let ClipBound::Finite(u) = clip.upper {
                if w > u {
                    upper = mass * (u - w);
                }
            }
            if let ClipBound::Finite(l) = clip.lower {
                let floor = F::one() / l;
                if w < floor {
                    lower = mass * (floor - w);
                }
            }
            upper_term = upper_term + upper;
            lower_term = lower_term + lower;
            if with_cells {
                cells.push(CellContribution {
                    context: x,
                    action: y,
                    upper,
                    lower,
                });
            }
        }
    }
    Ok(BiasReport {
        bias_total: upper_term + lower_term,
        upper_term,
        lower_term,
        per_cell: with_cells.then_some(cells),
    })
}

/// Exact bias of cIPS with upper constant `U`:
/// `E_x E_{y~π}[1{w > U}·(U/w − 1)·E[r|x,y]]`. Always <= 0.
pub fn bias_cips_exact<F: Float>(
    env: &TabularEnvironment<F>,
    target: &PolicyTable<F>,
    upper: ClipBound<F>,
) -> Result<BiasReport<F>> {
    let clip = ClipConfig::new(upper, ClipBound::Unbounded)?;
    bias_terms(env, target, clip, false)
}

/// Exact bias of dcIPS: the upper term of [`bias_cips_exact`] plus the lower
/// term `E_x E_{y~π}[1{wL < 1}·(1/(wL) − 1)·E[r|x,y]]`, which is always >= 0.
pub fn bias_dcips_exact<F: Float>(
    env: &TabularEnvironment<F>,
    target: &PolicyTable<F>,
    clip: ClipConfig<F>,
) -> Result<BiasReport<F>> {
    bias_terms(env, target, clip, true)
}

/// Both sides of the importance sampling identity
/// `E_{y~π₀}[f(x,y)·w(x,y)] = E_{y~π}[f(x,y)]`, enumerated exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck<F> {
    pub lhs: F,
    pub rhs: F,
    pub abs_diff: F,
}

/// Enumerates both sides of the importance sampling identity for an
/// arbitrary per-(context, action) table `f`.
pub fn check_is_identity<F: Float>(
    env: &TabularEnvironment<F>,
    target: &PolicyTable<F>,
    test_fn: &PolicyTable<F>,
) -> Result<IdentityCheck<F>> {
    check_target(env, target)?;
    if test_fn.len() != env.num_contexts()
        || test_fn.iter().any(|row| row.len() != env.num_actions())
    {
        return Err(Error::DimensionMismatch(
            "test table does not match environment dimensions".into(),
        ));
    }
    let mut lhs = F::zero();
    let mut rhs = F::zero();
    for x in 0..env.num_contexts() {
        for y in 0..env.num_actions() {
            let logging_prop = env.logging_table[x][y];
            if logging_prop > F::zero() {
                let w = target[x][y] / logging_prop;
                lhs = lhs + env.context_probs[x] * logging_prop * test_fn[x][y] * w;
            }
            rhs = rhs + env.context_probs[x] * target[x][y] * test_fn[x][y];
        }
    }
    Ok(IdentityCheck {
        lhs,
        rhs,
        abs_diff: (lhs - rhs).abs(),
    })
}

/// Checks that `max(min(w, U), 1/L)` equals the three-way indicator
/// decomposition `1{w > U}·U + 1{1/L <= w <= U}·w + 1{w < 1/L}·(1/L)` for a
/// single weight, with boundary values left unclipped.
pub fn check_clip_decomposition<F: Float>(w: F, upper: F, lower: F) -> bool {
    let floor = F::one() / lower;
    if upper < floor {
        return false;
    }
    let direct = w.min(upper).max(floor);
    let decomposed = if w > upper {
        upper
    } else if w < floor {
        floor
    } else {
        w
    };
    direct == decomposed
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn worked_example() -> TabularEnvironment<f64> {
        TabularEnvironment::two_action_example()
    }

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() <= TOL, "{a} vs {b}");
    }

    /// Random strictly-positive tabular environment for consistency checks.
    pub(crate) fn random_env(rng: &mut ChaCha8Rng) -> TabularEnvironment<f64> {
        let num_contexts = rng.random_range(1..=5);
        let num_actions = rng.random_range(2..=8);
        let normalize = |raw: Vec<f64>| {
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect::<Vec<_>>()
        };
        let random_simplex = |rng: &mut ChaCha8Rng, len: usize| {
            normalize((0..len).map(|_| rng.random_range(0.05..1.0)).collect())
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
        TabularEnvironment::new(context_probs, logging_table, target_table, expected_rewards)
            .unwrap()
    }

    #[test]
    fn unclipped_expectation_is_true_reward() {
        let env = worked_example();
        let value =
            exact_expected_estimate(&env, &env.target_table, ClipConfig::unclipped()).unwrap();
        assert_close(value, exact_true_reward(&env, &env.target_table));
        assert_close(value, 1.0);
    }

    #[test]
    fn worked_example_expected_estimates() {
        let env = worked_example();
        let upper_only = ClipConfig::upper_only(2.0).unwrap();
        assert_close(
            exact_expected_estimate(&env, &env.target_table, upper_only).unwrap(),
            0.7,
        );
        let two_sided = ClipConfig::two_sided(2.0, 1.0).unwrap();
        assert_close(
            exact_expected_estimate(&env, &env.target_table, two_sided).unwrap(),
            1.1,
        );
    }

    #[test]
    fn exact_true_reward_cases() {
        let env = worked_example();
        assert_close(exact_true_reward(&env, &env.target_table), 1.0);
        // on-policy: equals the expected logging reward
        assert_close(
            exact_true_reward(&env, &env.logging_table),
            0.9 * 1.0 + 0.1 * 1.0,
        );
        // constant rewards give the constant for any policy
        let constant = TabularEnvironment::new(
            vec![0.4, 0.6],
            vec![vec![0.3, 0.7], vec![0.5, 0.5]],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![0.25, 0.25], vec![0.25, 0.25]],
        )
        .unwrap();
        assert_close(exact_true_reward(&constant, &constant.target_table), 0.25);
    }

    #[test]
    fn worked_example_cips_bias() {
        let env = worked_example();
        let report = bias_cips_exact(&env, &env.target_table, ClipBound::Finite(2.0)).unwrap();
        assert_close(report.bias_total, -0.3);
        assert_eq!(report.lower_term, 0.0);
        // cross-check against E[estimate] - truth
        let expected =
            exact_expected_estimate(&env, &env.target_table, ClipConfig::upper_only(2.0).unwrap())
                .unwrap();
        assert_close(report.bias_total, expected - 1.0);
    }

    #[test]
    fn cips_bias_zero_when_clipping_inactive() {
        let env = worked_example();
        // max cell weight is 0.5/0.1 = 5
        let report = bias_cips_exact(&env, &env.target_table, ClipBound::Finite(5.0)).unwrap();
        assert_eq!(report.bias_total, 0.0);
        let report = bias_cips_exact(&env, &env.target_table, ClipBound::Unbounded).unwrap();
        assert_eq!(report.bias_total, 0.0);
    }

    #[test]
    fn cips_bias_zero_when_clipped_cells_have_zero_reward() {
        let env = TabularEnvironment::new(
            vec![1.0],
            vec![vec![0.9, 0.1]],
            vec![vec![0.5, 0.5]],
            vec![vec![1.0, 0.0]], // the clipped cell (w = 5) pays nothing
        )
        .unwrap();
        let report = bias_cips_exact(&env, &env.target_table, ClipBound::Finite(2.0)).unwrap();
        assert_eq!(report.bias_total, 0.0);
    }

    #[test]
    fn worked_example_dcips_bias() {
        let env = worked_example();
        let clip = ClipConfig::two_sided(2.0, 1.0).unwrap();
        let report = bias_dcips_exact(&env, &env.target_table, clip).unwrap();
        assert_close(report.upper_term, -0.3);
        assert_close(report.lower_term, 0.4);
        assert_close(report.bias_total, 0.1);
        // per-cell contributions sum to the totals
        let cells = report.per_cell.unwrap();
        let upper_sum: f64 = cells.iter().map(|c| c.upper).sum();
        let lower_sum: f64 = cells.iter().map(|c| c.lower).sum();
        assert_close(upper_sum, report.upper_term);
        assert_close(lower_sum, report.lower_term);
    }

    #[test]
    fn dcips_bias_with_unbounded_lower_matches_cips() {
        let env = worked_example();
        let clip = ClipConfig::new(ClipBound::Finite(2.0), ClipBound::Unbounded).unwrap();
        let dc = bias_dcips_exact(&env, &env.target_table, clip).unwrap();
        let c = bias_cips_exact(&env, &env.target_table, ClipBound::Finite(2.0)).unwrap();
        assert_eq!(dc.bias_total, c.bias_total);
        assert_eq!(dc.lower_term, 0.0);
    }

    #[test]
    fn dcips_bias_at_unit_constants() {
        // with both constants at 1 the expected estimate is the expected
        // logging reward; here rewards are constant so the bias is 0
        let env = worked_example();
        let clip = ClipConfig::two_sided(1.0, 1.0).unwrap();
        let report = bias_dcips_exact(&env, &env.target_table, clip).unwrap();
        assert_close(report.bias_total, 0.0);
    }

    #[test]
    fn consistency_on_random_environments() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let env = random_env(&mut rng);
            let u = rng.random_range(1.0..10.0);
            let l = rng.random_range(1.0..10.0);
            let truth = exact_true_reward(&env, &env.target_table);

            let upper_only = ClipConfig::upper_only(u).unwrap();
            let expected = exact_expected_estimate(&env, &env.target_table, upper_only).unwrap();
            let bias = bias_cips_exact(&env, &env.target_table, ClipBound::Finite(u)).unwrap();
            assert!((expected - truth - bias.bias_total).abs() <= TOL);
            assert!(bias.bias_total <= 0.0);

            let two_sided = ClipConfig::two_sided(u, l).unwrap();
            let expected = exact_expected_estimate(&env, &env.target_table, two_sided).unwrap();
            let bias = bias_dcips_exact(&env, &env.target_table, two_sided).unwrap();
            assert!((expected - truth - bias.bias_total).abs() <= TOL);
            assert!(bias.upper_term <= 0.0);
            assert!(bias.lower_term >= 0.0);
        }
    }

    #[test]
    fn cips_bias_monotone_in_upper_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..20 {
            let env = random_env(&mut rng);
            let mut u1 = rng.random_range(1.0..10.0);
            let mut u2 = rng.random_range(1.0..10.0);
            if u1 > u2 {
                std::mem::swap(&mut u1, &mut u2);
            }
            let b1 = bias_cips_exact(&env, &env.target_table, ClipBound::Finite(u1)).unwrap();
            let b2 = bias_cips_exact(&env, &env.target_table, ClipBound::Finite(u2)).unwrap();
            assert!(b1.bias_total <= b2.bias_total + TOL);
        }
    }

    #[test]
    fn identity_trivial_tables() {
        let env = worked_example();
        let ones = vec![vec![1.0, 1.0]];
        let check = check_is_identity(&env, &env.target_table, &ones).unwrap();
        assert_close(check.lhs, 1.0);
        assert_close(check.rhs, 1.0);
        let rewards = env.expected_rewards.clone();
        let check = check_is_identity(&env, &env.target_table, &rewards).unwrap();
        assert_close(check.lhs, exact_true_reward(&env, &env.target_table));
        assert!(check.abs_diff <= TOL);
    }

    #[test]
    fn identity_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let env = random_env(&mut rng);
            let table: Vec<Vec<f64>> = (0..env.num_contexts())
                .map(|_| {
                    (0..env.num_actions())
                        .map(|_| rng.random_range(-2.0..2.0))
                        .collect()
                })
                .collect();
            let check = check_is_identity(&env, &env.target_table, &table).unwrap();
            assert!(check.abs_diff <= TOL, "diff {}", check.abs_diff);
        }
    }

    #[test]
    fn overlap_violation_detected() {
        let env = worked_example();
        let bad_target = vec![vec![0.5, 0.5]];
        let bad_env = TabularEnvironment {
            logging_table: vec![vec![1.0, 0.0]],
            ..env
        };
        assert!(matches!(
            exact_expected_estimate(&bad_env, &bad_target, ClipConfig::unclipped()),
            Err(Error::OverlapViolation { .. })
        ));
    }

    #[test]
    fn clip_decomposition_cases() {
        assert!(check_clip_decomposition(5.0, 2.0, 1.0)); // clipped to 2
        assert!(check_clip_decomposition(0.2, 2.0, 1.0)); // lifted to 1
        assert!(check_clip_decomposition(2.0, 2.0, 1.0)); // w == U boundary
        assert!(check_clip_decomposition(0.5, 2.0, 2.0)); // w == 1/L boundary
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let w = rng.random_range(0.0..20.0);
            let u = rng.random_range(1.0..20.0);
            let l = rng.random_range(1.0..20.0);
            assert!(check_clip_decomposition(w, u, l));
        }
    }
}
