use serde::{Deserialize, Serialize};

use super::{descriptor_matrices, fit_all_clusters, process_user, PeriodConfig, UserDescriptors};
use crate::classify::{evaluate, train, Dataset, TrainConfig};
use crate::clustering::{build_nominal_matrix, ClusterConfig};
use crate::corpus::{synthesize_series_map, CohortSpec};
use crate::error::{Error, Result};
use crate::intensity::{IntensitySmoother, KernelConfig};
use crate::lexicon::FeatureSchema;
use crate::seed::derive_seed;

/// One synthetic cohort run end to end in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cohort: CohortSpec,
    pub periods: PeriodConfig,
    pub smoothing: KernelConfig,
    pub cluster: ClusterConfig,
    pub train: TrainConfig,
    /// Size of the influence list the planted features must fall in.
    pub top: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cohort: CohortSpec {
                n_background: 2000,
                ..Default::default()
            },
            periods: PeriodConfig::default(),
            smoothing: KernelConfig::default(),
            cluster: ClusterConfig {
                restarts: 1,
                silhouette_sample: 500,
                ..Default::default()
            },
            train: TrainConfig::default(),
            top: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub seed: u64,
    pub cart_accuracy: f64,
    pub gbm_accuracy: f64,
    /// Boosted-model influence list, truncated to `top`.
    pub top_features: Vec<String>,
    /// Whether every planted feature is in `top_features`.
    pub planted_in_top: bool,
}

/// Synthesize, cluster the background, encode the labeled users and train.
///
/// `seed` replaces the cohort's own seed and drives every later stage.
pub fn run_experiment(
    config: &ExperimentConfig,
    schema: &FeatureSchema,
    seed: u64,
) -> Result<ExperimentOutcome> {
    config.periods.validate()?;
    config.cluster.validate()?;
    config.train.validate()?;
    let smoother = IntensitySmoother::new(&config.smoothing)?;
    let cohort = CohortSpec {
        seed: derive_seed(seed, "synth", 0),
        ..config.cohort.clone()
    };
    let users: Vec<UserDescriptors> = synthesize_series_map(&cohort, schema, |set| {
        process_user(&set, schema, &config.periods, &smoother)
    })?;
    let (labeled, background): (Vec<_>, Vec<_>) =
        users.into_iter().partition(|u| u.label.is_some());
    if labeled.is_empty() {
        return Err(Error::invalid("cohort has no labeled users"));
    }
    let labels: Vec<_> = labeled.iter().filter_map(|u| u.label).collect();

    let models = fit_all_clusters(
        &descriptor_matrices(&background, schema)?,
        &config.cluster,
        seed,
    )?;
    let nominal = build_nominal_matrix(&models, &descriptor_matrices(&labeled, schema)?, &labels)?;
    let data = Dataset::from_nominal(&nominal)?;
    let outcome = train(&data, &config.train, seed)?;
    let (cart, gbm) = evaluate(&outcome, &data)?;

    let top_features: Vec<String> = outcome
        .influence
        .top(config.top)
        .into_iter()
        .map(String::from)
        .collect();
    let planted_in_top = cohort
        .planted
        .iter()
        .all(|p| top_features.contains(&p.feature));
    Ok(ExperimentOutcome {
        seed,
        cart_accuracy: cart.correct() as f64 / cart.total() as f64,
        gbm_accuracy: gbm.correct() as f64 / gbm.total() as f64,
        top_features,
        planted_in_top,
    })
}
