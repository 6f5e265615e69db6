//! Configuration loading, dataset/result serialization, and the command
//! implementations behind the `dclip` binary.
//!
//! Configs are a single declarative TOML file; datasets are JSON-lines (one
//! record per line, exact float round-trip); sweep results are CSV with a
//! `#`-prefixed metadata header block. All commands are deterministic given
//! `(config, seed)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimators::{
    cips, dcips, importance_weight, ips, ClipBound, ClipConfig, Dataset, Estimate, ImportanceWeight,
    LogRecord,
};
use crate::harness::{run_sweep, SweepConfig, SweepResult};
use crate::oracle::{bias_dcips_exact, exact_expected_estimate, exact_true_reward, BiasReport};
use crate::synth::{
    simulate, softmax_propensities, tabular_simulate, FeatureMatrix, GaussianFeatureEnv,
    LinearSoftmaxPolicy, Seed, TabularEnvironment,
};
use crate::Result;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Top-level run configuration, mirroring the TOML file layout.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub seed: u64,
    pub environment: EnvSpec,
    #[serde(default)]
    pub logging_policy: Option<PolicySpec>,
    #[serde(default)]
    pub target_policy: Option<PolicySpec>,
    #[serde(default)]
    pub estimator: Option<EstimatorSpec>,
    #[serde(default)]
    pub simulate: Option<SimulateSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_schema_version() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvSpec {
    Gaussian {
        num_actions: usize,
        sigma: f64,
        reward_weights: Vec<f64>,
    },
    Tabular {
        context_probs: Vec<f64>,
        logging_table: Vec<Vec<f64>>,
        target_table: Vec<Vec<f64>>,
        expected_rewards: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Ips,
    Cips,
    Dcips,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default)]
    pub lower: Option<f64>,
}

impl EstimatorSpec {
    /// Missing or non-finite constants mean "unbounded".
    fn upper_bound(&self) -> ClipBound<f64> {
        match self.upper {
            Some(u) if u.is_finite() => ClipBound::Finite(u),
            _ => ClipBound::Unbounded,
        }
    }

    fn lower_bound(&self) -> ClipBound<f64> {
        match self.lower {
            Some(l) if l.is_finite() => ClipBound::Finite(l),
            _ => ClipBound::Unbounded,
        }
    }

    pub fn clip_config(&self) -> Result<ClipConfig<f64>> {
        match self.kind {
            EstimatorKind::Ips => Ok(ClipConfig::unclipped()),
            EstimatorKind::Cips => ClipConfig::new(self.upper_bound(), ClipBound::Unbounded),
            EstimatorKind::Dcips => ClipConfig::new(self.upper_bound(), self.lower_bound()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub n_rounds: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Unison,
    Explicit,
}

fn default_sweep_mode() -> SweepMode {
    SweepMode::Unison
}

fn default_u_min() -> f64 {
    1.0
}

fn default_u_max() -> f64 {
    100.0
}

fn default_num_points() -> usize {
    25
}

fn default_true_reward_samples() -> usize {
    1_000_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n_rounds: usize,
    pub repetitions: usize,
    #[serde(default = "default_sweep_mode")]
    pub mode: SweepMode,
    #[serde(default = "default_u_min")]
    pub u_min: f64,
    #[serde(default = "default_u_max")]
    pub u_max: f64,
    #[serde(default = "default_num_points")]
    pub num_points: usize,
    #[serde(default)]
    pub grid: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_true_reward_samples")]
    pub true_reward_samples: usize,
}

impl SweepSpec {
    pub fn to_sweep_config(&self) -> Result<SweepConfig<f64>> {
        match self.mode {
            SweepMode::Unison => SweepConfig::unison_log_grid(
                self.u_min,
                self.u_max,
                self.num_points,
                self.n_rounds,
                self.repetitions,
                self.true_reward_samples,
            ),
            SweepMode::Explicit => {
                let grid = self
                    .grid
                    .as_ref()
                    .ok_or_else(|| {
                        Error::InvalidConfig("explicit sweep mode needs a grid".into())
                    })?
                    .iter()
                    .map(|&[u, l]| (u, l))
                    .collect();
                SweepConfig::new(
                    grid,
                    self.n_rounds,
                    self.repetitions,
                    self.true_reward_samples,
                )
            }
        }
    }
}

impl RunConfig {
    pub fn gaussian_env(&self) -> Result<GaussianFeatureEnv<f64>> {
        match &self.environment {
            EnvSpec::Gaussian {
                num_actions,
                sigma,
                reward_weights,
            } => GaussianFeatureEnv::new(*num_actions, *sigma, reward_weights.clone()),
            EnvSpec::Tabular { .. } => Err(Error::InvalidConfig(
                "this command needs a gaussian environment".into(),
            )),
        }
    }

    pub fn tabular_env(&self) -> Result<TabularEnvironment<f64>> {
        match &self.environment {
            EnvSpec::Tabular {
                context_probs,
                logging_table,
                target_table,
                expected_rewards,
            } => TabularEnvironment::new(
                context_probs.clone(),
                logging_table.clone(),
                target_table.clone(),
                expected_rewards.clone(),
            ),
            EnvSpec::Gaussian { .. } => Err(Error::UnsupportedEnvironment),
        }
    }

    fn policy(spec: &Option<PolicySpec>, role: &str) -> Result<LinearSoftmaxPolicy<f64>> {
        spec.as_ref()
            .map(|p| LinearSoftmaxPolicy::new(p.weights.clone()))
            .ok_or_else(|| Error::InvalidConfig(format!("missing [{role}] section")))
    }

    pub fn logging_policy(&self) -> Result<LinearSoftmaxPolicy<f64>> {
        Self::policy(&self.logging_policy, "logging_policy")
    }

    pub fn target_policy(&self) -> Result<LinearSoftmaxPolicy<f64>> {
        Self::policy(&self.target_policy, "target_policy")
    }

    pub fn estimator(&self) -> Result<&EstimatorSpec> {
        self.estimator
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing [estimator] section".into()))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses the TOML run configuration at `path`.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// One dataset line. Gaussian-environment records carry the per-round feature
/// matrix; tabular records carry the context id instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
    pub action: usize,
    pub reward: f64,
    pub logging_propensities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_id: Option<u64>,
}

/// Writes a dataset as JSON-lines, one record per line.
pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serialization"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

/// Reads a JSON-lines dataset, reporting the 1-based line number on parse
/// failures.
pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Result of `dclip simulate`: where the data went and how it was generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulateSummary {
    pub n: usize,
    pub seed: u64,
}

/// Simulates logged data per the config and writes it as JSON-lines.
pub fn cmd_simulate(config_path: &Path, out_path: &Path, seed_override: Option<u64>) -> Result<SimulateSummary> {
    let config = load_config(config_path)?;
    let seed_value = seed_override.unwrap_or(config.seed);
    let seed = Seed::new(seed_value);
    let n = config
        .simulate
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing [simulate] section".into()))?
        .n_rounds;
    if n == 0 {
        return Err(Error::InvalidConfig("simulate.n_rounds must be >= 1".into()));
    }
    let records = match &config.environment {
        EnvSpec::Gaussian { .. } => {
            let env = config.gaussian_env()?;
            let logging = config.logging_policy()?;
            let log = simulate(&env, &logging, n, seed)?;
            log.rounds()
                .iter()
                .map(|round| DatasetRecord {
                    schema_version: DATASET_SCHEMA_VERSION,
                    features: Some(round.features.rows().to_vec()),
                    action: round.action,
                    reward: round.reward,
                    logging_propensities: round.logging_propensities.clone(),
                    context_id: None,
                })
                .collect::<Vec<_>>()
        }
        EnvSpec::Tabular { .. } => {
            let env = config.tabular_env()?;
            let dataset = tabular_simulate(&env, n, seed)?;
            dataset
                .records()
                .iter()
                .map(|record| DatasetRecord {
                    schema_version: DATASET_SCHEMA_VERSION,
                    features: None,
                    action: record.action,
                    reward: record.reward,
                    logging_propensities: env.logging_table[record.context_id as usize].clone(),
                    context_id: Some(record.context_id),
                })
                .collect()
        }
    };
    write_dataset(out_path, &records)?;
    Ok(SimulateSummary { n, seed: seed_value })
}

fn dataset_and_weights(
    config: &RunConfig,
    records: &[DatasetRecord],
) -> Result<(Dataset<f64>, Vec<ImportanceWeight<f64>>)> {
    let mut log_records = Vec::with_capacity(records.len());
    let mut weights = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let logging_prop = *record
            .logging_propensities
            .get(record.action)
            .ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "action index outside the propensity vector".into(),
            })?;
        let target_prop = match &config.environment {
            EnvSpec::Gaussian { .. } => {
                let rows = record.features.clone().ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: "record has no feature matrix".into(),
                })?;
                let features = FeatureMatrix::new(rows)?;
                let target = config.target_policy()?;
                softmax_propensities(&target, &features)?[record.action]
            }
            EnvSpec::Tabular { .. } => {
                let env = config.tabular_env()?;
                let context = record.context_id.ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: "tabular record has no context_id".into(),
                })? as usize;
                *env.target_table
                    .get(context)
                    .and_then(|row| row.get(record.action))
                    .ok_or_else(|| Error::Parse {
                        line: i + 1,
                        message: "context or action outside the target table".into(),
                    })?
            }
        };
        let context_id = record.context_id.unwrap_or(i as u64);
        log_records.push(LogRecord::new(
            context_id,
            record.action,
            record.reward,
            logging_prop,
        )?);
        weights.push(importance_weight(target_prop, logging_prop)?);
    }
    Ok((Dataset::new(log_records), weights))
}

/// Loads a dataset, evaluates target propensities, and runs the configured
/// estimator. Optionally writes the estimate as JSON.
pub fn cmd_estimate(
    config_path: &Path,
    dataset_path: &Path,
    out_path: Option<&Path>,
) -> Result<Estimate<f64>> {
    let config = load_config(config_path)?;
    let records = read_dataset(dataset_path)?;
    let (dataset, weights) = dataset_and_weights(&config, &records)?;
    let spec = config.estimator()?;
    let estimate = match spec.kind {
        EstimatorKind::Ips => ips(&dataset, &weights)?,
        EstimatorKind::Cips => cips(&dataset, &weights, spec.upper_bound())?,
        EstimatorKind::Dcips => dcips(&dataset, &weights, spec.clip_config()?)?,
    };
    if let Some(out) = out_path {
        let json = serde_json::to_string_pretty(&estimate).expect("estimate serialization");
        fs::write(out, json).map_err(|e| io_error(out, e))?;
    }
    Ok(estimate)
}

/// Result of `dclip sweep`: the full sweep plus the MSE-minimizing grid
/// points for the printed summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub result: SweepResult<f64>,
    pub best_cips: (f64, f64, f64),
    pub best_dcips: (f64, f64, f64),
}

/// Runs the configured clipping-constant sweep and writes the CSV.
pub fn cmd_sweep(config_path: &Path, out_path: &Path, seed_override: Option<u64>) -> Result<SweepSummary> {
    let config = load_config(config_path)?;
    let seed = Seed::new(seed_override.unwrap_or(config.seed));
    let env = config.gaussian_env()?;
    let logging = config.logging_policy()?;
    let target = config.target_policy()?;
    let sweep_cfg = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing [sweep] section".into()))?
        .to_sweep_config()?;
    let result = run_sweep(&env, &logging, &target, &sweep_cfg, seed)?;
    fs::write(out_path, result.to_csv()).map_err(|e| io_error(out_path, e))?;
    let best_cips = result.min_mse_point(|p| &p.cips);
    let best_cips = (best_cips.upper, best_cips.lower, best_cips.cips.mse);
    let best_dcips = result.min_mse_point(|p| &p.dcips);
    let best_dcips = (best_dcips.upper, best_dcips.lower, best_dcips.dcips.mse);
    Ok(SweepSummary {
        result,
        best_cips,
        best_dcips,
    })
}

/// Result of `dclip oracle`: exact quantities on the configured tabular
/// environment, plus the consistency residual `|E[R̂] − R(π) − bias|`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub bias: BiasReport<f64>,
    pub expected_estimate: f64,
    pub true_reward: f64,
    pub residual: f64,
}

/// Computes the exact expected estimate, true reward, and bias decomposition
/// for the configured tabular environment and clipping constants.
pub fn cmd_oracle(config_path: &Path) -> Result<OracleSummary> {
    let config = load_config(config_path)?;
    let env = config.tabular_env()?;
    let clip = config.estimator()?.clip_config()?;
    let expected_estimate = exact_expected_estimate(&env, &env.target_table, clip)?;
    let true_reward = exact_true_reward(&env, &env.target_table);
    let bias = bias_dcips_exact(&env, &env.target_table, clip)?;
    let residual = (expected_estimate - true_reward - bias.bias_total).abs();
    Ok(OracleSummary {
        bias,
        expected_estimate,
        true_reward,
        residual,
    })
}
