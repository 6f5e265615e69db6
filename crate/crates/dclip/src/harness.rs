//! Repeated-simulation sweep over clipping constants with a
//! bias²/variance/MSE decomposition.
//!
//! The sweep follows a paired design: the same K simulated datasets are
//! reused across every grid point, so the cIPS and dcIPS curves differ only
//! through the clipping constants. Repetition `k` draws its dataset from
//! stream `k` of the master seed; the Monte Carlo truth uses a reserved
//! stream, so adding repetitions never perturbs existing ones.

use rand::distr::{Distribution, StandardUniform};
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::estimators::{cips, dcips, logging_mean, ClipBound, ClipConfig};
use crate::float::Float;
use crate::synth::{
    importance_weights, simulate, true_reward_mc, GaussianFeatureEnv, LinearSoftmaxPolicy, Seed,
};
use crate::Result;

/// Stream id reserved for the Monte Carlo truth estimate; repetitions use
/// streams `0..repetitions`.
pub const TRUTH_STREAM: u64 = u64::MAX;

/// Sweep plan: grid of `(U, L)` pairs plus simulation sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig<F> {
    pub grid: Vec<(F, F)>,
    pub n_rounds: usize,
    pub repetitions: usize,
    pub true_reward_samples: usize,
}

impl<F: Float> SweepConfig<F> {
    pub fn new(
        grid: Vec<(F, F)>,
        n_rounds: usize,
        repetitions: usize,
        true_reward_samples: usize,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        for &(u, l) in &grid {
            ClipConfig::two_sided(u, l)?;
        }
        if repetitions < 2 {
            return Err(Error::InvalidConfig(
                "variance estimation needs at least 2 repetitions".into(),
            ));
        }
        if n_rounds == 0 || true_reward_samples == 0 {
            return Err(Error::InvalidConfig(
                "n_rounds and true_reward_samples must be positive".into(),
            ));
        }
        Ok(Self {
            grid,
            n_rounds,
            repetitions,
            true_reward_samples,
        })
    }

    /// The single-hyperparameter heuristic: U = L on a logarithmic grid.
    pub fn unison_log_grid(
        min: F,
        max: F,
        points: usize,
        n_rounds: usize,
        repetitions: usize,
        true_reward_samples: usize,
    ) -> Result<Self> {
        if points < 2 || !(min >= F::one()) || !(max > min) {
            return Err(Error::InvalidConfig(
                "log grid needs min >= 1 < max and at least 2 points".into(),
            ));
        }
        let log_min = min.ln();
        let log_max = max.ln();
        let step = (log_max - log_min) / F::from_count(points - 1);
        let grid = (0..points)
            .map(|i| {
                let v = (log_min + step * F::from_count(i)).exp();
                (v, v)
            })
            .collect();
        Self::new(grid, n_rounds, repetitions, true_reward_samples)
    }

    /// Default grid: 25 log-spaced values of U = L from 1 to 100.
    pub fn default_unison(
        n_rounds: usize,
        repetitions: usize,
        true_reward_samples: usize,
    ) -> Result<Self> {
        Self::unison_log_grid(
            F::one(),
            F::cast(100.0),
            25,
            n_rounds,
            repetitions,
            true_reward_samples,
        )
    }
}

/// Aggregate statistics for one estimator at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorStats<F> {
    pub mean: F,
    pub std_error: F,
    pub bias_sq: F,
    pub variance: F,
    pub mse: F,
}

/// One grid point of the sweep: both estimators at clipping constants (U, L);
/// cIPS uses only U.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPointResult<F> {
    pub upper: F,
    pub lower: F,
    pub cips: EstimatorStats<F>,
    pub dcips: EstimatorStats<F>,
}

/// Full sweep output, plus the quantities every curve is judged against.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<F> {
    pub points: Vec<GridPointResult<F>>,
    pub true_reward: F,
    pub true_reward_se: F,
    pub logging_mean_of_means: F,
    pub n_rounds: usize,
    pub repetitions: usize,
    pub master_seed: u64,
}

impl<F: Float> SweepResult<F> {
    /// Grid point with the lowest MSE for the given estimator curve.
    pub fn min_mse_point(&self, pick: impl Fn(&GridPointResult<F>) -> &EstimatorStats<F>) -> &GridPointResult<F> {
        self.points
            .iter()
            .min_by(|a, b| {
                pick(a)
                    .mse
                    .partial_cmp(&pick(b).mse)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("grid is nonempty")
    }

    /// CSV rendering: `#`-prefixed metadata header block, then one row per
    /// grid point per estimator. Column order is fixed:
    /// `U,L,estimator,mean,std_error,bias_sq,variance,mse`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# schema_version = 1\n");
        out.push_str(&format!("# seed = {}\n", self.master_seed));
        out.push_str(&format!("# n = {}\n", self.n_rounds));
        out.push_str(&format!("# repetitions = {}\n", self.repetitions));
        out.push_str(&format!("# true_reward = {}\n", self.true_reward));
        out.push_str(&format!("# true_reward_se = {}\n", self.true_reward_se));
        out.push_str(&format!(
            "# logging_mean_of_means = {}\n",
            self.logging_mean_of_means
        ));
        out.push_str("# variance/bias_sq/mse use the population convention (divisor K)\n");
        out.push_str("# std_error uses the sample convention (divisor K-1) over sqrt(K)\n");
        out.push_str("U,L,estimator,mean,std_error,bias_sq,variance,mse\n");
        for point in &self.points {
            for (name, stats) in [("cips", &point.cips), ("dcips", &point.dcips)] {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    point.upper,
                    point.lower,
                    name,
                    stats.mean,
                    stats.std_error,
                    stats.bias_sq,
                    stats.variance,
                    stats.mse
                ));
            }
        }
        out
    }
}

fn mean_of<F: Float>(values: &[F]) -> F {
    values.iter().copied().sum::<F>() / F::from_count(values.len())
}

/// Splits the mean squared error around `truth` into squared bias and
/// variance: `bias_sq = (mean − truth)²`, `variance = (1/K)Σ(eₖ − mean)²`,
/// `mse = (1/K)Σ(eₖ − truth)²`. With the population divisor the identity
/// `mse == bias_sq + variance` holds algebraically.
pub fn decompose_error<F: Float>(estimates: &[F], truth: F) -> Result<(F, F, F)> {
    if estimates.len() < 2 {
        return Err(Error::InvalidConfig(
            "error decomposition needs at least 2 estimates".into(),
        ));
    }
    if !truth.is_finite() {
        return Err(Error::NonFinite("truth value".into()));
    }
    let k = F::from_count(estimates.len());
    let mean = mean_of(estimates);
    let bias_sq = (mean - truth) * (mean - truth);
    let variance = estimates
        .iter()
        .map(|&e| (e - mean) * (e - mean))
        .sum::<F>()
        / k;
    let mse = estimates
        .iter()
        .map(|&e| (e - truth) * (e - truth))
        .sum::<F>()
        / k;
    Ok((bias_sq, variance, mse))
}

/// Standard error of the mean: sample standard deviation (divisor K−1) over
/// `sqrt(K)`.
pub fn standard_error<F: Float>(estimates: &[F]) -> Result<F> {
    if estimates.len() < 2 {
        return Err(Error::InvalidConfig(
            "standard error needs at least 2 estimates".into(),
        ));
    }
    let k = estimates.len();
    let mean = mean_of(estimates);
    let sample_var = estimates
        .iter()
        .map(|&e| (e - mean) * (e - mean))
        .sum::<F>()
        / F::from_count(k - 1);
    Ok((sample_var / F::from_count(k)).sqrt())
}

fn stats_for<F: Float>(estimates: &[F], truth: F) -> Result<EstimatorStats<F>> {
    let (bias_sq, variance, mse) = decompose_error(estimates, truth)?;
    Ok(EstimatorStats {
        mean: mean_of(estimates),
        std_error: standard_error(estimates)?,
        bias_sq,
        variance,
        mse,
    })
}

/// Runs the full sweep: K fresh simulations under the logging policy, cIPS
/// and dcIPS at every grid point on the same K datasets, aggregated against
/// a Monte Carlo truth. Deterministic given the seed.
pub fn run_sweep<F>(
    env: &GaussianFeatureEnv<F>,
    logging_policy: &LinearSoftmaxPolicy<F>,
    target_policy: &LinearSoftmaxPolicy<F>,
    cfg: &SweepConfig<F>,
    seed: Seed,
) -> Result<SweepResult<F>>
where
    F: Float,
    StandardNormal: Distribution<F>,
    StandardUniform: Distribution<F>,
{
    if cfg.repetitions < 2 {
        return Err(Error::InvalidConfig(
            "variance estimation needs at least 2 repetitions".into(),
        ));
    }
    let (true_reward, true_reward_se) = true_reward_mc(
        env,
        target_policy,
        cfg.true_reward_samples,
        seed.stream(TRUTH_STREAM),
    )?;

    let mut datasets = Vec::with_capacity(cfg.repetitions);
    let mut logging_means = Vec::with_capacity(cfg.repetitions);
    for k in 0..cfg.repetitions {
        let log = simulate(env, logging_policy, cfg.n_rounds, seed.stream(k as u64))?;
        let weights = importance_weights(&log, target_policy)?;
        let dataset = log.to_dataset()?;
        logging_means.push(logging_mean(&dataset)?.value);
        datasets.push((dataset, weights));
    }

    let mut points = Vec::with_capacity(cfg.grid.len());
    for &(upper, lower) in &cfg.grid {
        let clip = ClipConfig::two_sided(upper, lower)?;
        let mut cips_estimates = Vec::with_capacity(cfg.repetitions);
        let mut dcips_estimates = Vec::with_capacity(cfg.repetitions);
        for (dataset, weights) in &datasets {
            cips_estimates.push(cips(dataset, weights, ClipBound::Finite(upper))?.value);
            dcips_estimates.push(dcips(dataset, weights, clip)?.value);
        }
        points.push(GridPointResult {
            upper,
            lower,
            cips: stats_for(&cips_estimates, true_reward)?,
            dcips: stats_for(&dcips_estimates, true_reward)?,
        });
    }

    Ok(SweepResult {
        points,
        true_reward,
        true_reward_se,
        logging_mean_of_means: mean_of(&logging_means),
        n_rounds: cfg.n_rounds,
        repetitions: cfg.repetitions,
        master_seed: seed.master_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::eight_action_benchmark;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn decompose_constant_estimates() {
        assert_eq!(decompose_error(&[2.0, 2.0, 2.0], 2.0).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn decompose_symmetric_around_truth() {
        assert_eq!(decompose_error(&[0.0, 2.0], 1.0).unwrap(), (0.0, 1.0, 1.0));
    }

    #[test]
    fn decompose_hand_arithmetic() {
        // mean 2, bias² 4, variance 1, mse (1 + 9)/2 = 5
        assert_eq!(decompose_error(&[1.0, 3.0], 0.0).unwrap(), (4.0, 1.0, 5.0));
    }

    #[test]
    fn decompose_identity_holds() {
        let estimates = [0.13f64, 1.7, -0.4, 2.25, 0.0];
        let (bias_sq, variance, mse) = decompose_error(&estimates, 0.77).unwrap();
        assert!((mse - (bias_sq + variance)).abs() <= 1e-12 * mse.max(1.0));
    }

    #[test]
    fn decompose_input_errors() {
        assert!(decompose_error(&[1.0], 0.0).is_err());
        assert!(decompose_error(&[1.0, 2.0], f64::NAN).is_err());
    }

    #[test]
    fn standard_error_cases() {
        assert_eq!(standard_error(&[3.0, 3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert_close(standard_error(&[0.0, 2.0]).unwrap(), 1.0, 1e-15);
        assert!(standard_error(&[1.0]).is_err());
        // doubling K with identical spread scales the SE by 1/sqrt(2)
        let once = standard_error(&[0.0, 2.0]).unwrap();
        let twice = standard_error(&[0.0, 2.0, 0.0, 2.0]).unwrap();
        // with the sample divisor the exact factor here is 1/sqrt(3)
        assert_close(twice, once / 3.0f64.sqrt(), 1e-12);
    }

    #[test]
    fn unison_grid_endpoints_and_size() {
        let cfg = SweepConfig::<f64>::default_unison(10, 2, 100).unwrap();
        assert_eq!(cfg.grid.len(), 25);
        assert_close(cfg.grid[0].0, 1.0, 1e-12);
        assert_close(cfg.grid[24].0, 100.0, 1e-9);
        for &(u, l) in &cfg.grid {
            assert_eq!(u, l);
        }
    }

    #[test]
    fn sweep_config_validation() {
        assert!(SweepConfig::<f64>::new(vec![], 10, 5, 10).is_err());
        assert!(SweepConfig::new(vec![(0.5, 1.0)], 10, 5, 10).is_err());
        assert!(SweepConfig::new(vec![(2.0, 2.0)], 10, 1, 10).is_err());
        assert!(SweepConfig::new(vec![(2.0, 2.0)], 0, 5, 10).is_err());
    }

    #[test]
    fn sweep_deterministic() {
        let (env, logging, target) = eight_action_benchmark::<f64>();
        let cfg = SweepConfig::new(vec![(1.0, 1.0), (5.0, 5.0)], 30, 4, 500).unwrap();
        let seed = Seed::new(77);
        let a = run_sweep(&env, &logging, &target, &cfg, seed).unwrap();
        let b = run_sweep(&env, &logging, &target, &cfg, seed).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_unit_grid_point_recovers_logging_mean() {
        let (env, logging, target) = eight_action_benchmark::<f64>();
        let cfg = SweepConfig::new(vec![(1.0, 1.0)], 25, 6, 500).unwrap();
        let result = run_sweep(&env, &logging, &target, &cfg, Seed::new(3)).unwrap();
        assert_eq!(result.points[0].dcips.mean, result.logging_mean_of_means);
    }

    #[test]
    fn sweep_dcips_mean_dominates_cips_mean() {
        let (env, logging, target) = eight_action_benchmark::<f64>();
        let cfg = SweepConfig::new(
            vec![(1.0, 1.0), (2.0, 2.0), (10.0, 10.0)],
            40,
            5,
            500,
        )
        .unwrap();
        let result = run_sweep(&env, &logging, &target, &cfg, Seed::new(31)).unwrap();
        for point in &result.points {
            assert!(point.dcips.mean >= point.cips.mean);
        }
    }

    #[test]
    fn csv_shape() {
        let (env, logging, target) = eight_action_benchmark::<f64>();
        let cfg = SweepConfig::new(vec![(1.0, 1.0), (3.0, 3.0)], 20, 3, 200).unwrap();
        let result = run_sweep(&env, &logging, &target, &cfg, Seed::new(1)).unwrap();
        let csv = result.to_csv();
        let data_rows: Vec<&str> = csv
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("U,"))
            .collect();
        assert_eq!(data_rows.len(), 4); // 2 grid points x 2 estimators
        assert!(csv.contains("U,L,estimator,mean,std_error,bias_sq,variance,mse"));
        assert!(csv.contains("# seed = 1"));
    }
}
