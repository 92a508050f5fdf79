//! Stage orchestration: per-user processing, on-disk artifacts and the
//! in-memory cohort experiment.

mod config;
mod experiment;
mod report;
mod stages;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{fit_kmeans_auto, ClusterConfig, ClusterModel};
use crate::corpus::RiskLabel;
use crate::descriptors::{describe, DescriptorMatrix, DescriptorRow};
use crate::error::{Error, Result};
use crate::intensity::{CountingObservation, IntensitySmoother, SmoothedSequence};
use crate::lexicon::{DailySeriesSet, FeatureSchema};
use crate::periodics::{
    dominant_period, resample_last_period, PeriodEstimate, ResampledSequence, MIN_PERIOD_DAYS,
};

pub use config::{EvaluateConfig, PathsConfig, PipelineConfig};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
pub use report::{render_center_table, write_report};
pub use stages::{run_all, run_stage, Artifacts, Stage, StageSummary};

/// Which series sets the period used to cut each feature's last cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodMode {
    /// Each feature's own dominant period.
    #[default]
    PerFeature,
    /// One period per user, from the daily word counts.
    PerUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodConfig {
    pub mode: PeriodMode,
    pub min_period_days: usize,
}

impl Default for PeriodConfig {
    fn default() -> Self {
        Self {
            mode: PeriodMode::PerFeature,
            min_period_days: MIN_PERIOD_DAYS,
        }
    }
}

impl PeriodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_period_days < MIN_PERIOD_DAYS {
            return Err(Error::config(
                "periods.min_period_days",
                format!("must be at least {MIN_PERIOD_DAYS}"),
            ));
        }
        Ok(())
    }
}

/// Detected periods and resampled last cycles of one user, one entry per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSequences {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<RiskLabel>,
    pub periods: Vec<PeriodEstimate>,
    pub sequences: Vec<ResampledSequence>,
}

pub fn user_sequences(
    set: &DailySeriesSet,
    schema: &FeatureSchema,
    config: &PeriodConfig,
) -> Result<UserSequences> {
    set.validate(schema.len())?;
    let days = set.days();
    if days < config.min_period_days {
        return Err(Error::invalid(format!(
            "user {}: {days} days is shorter than the minimum period {}",
            set.user_id, config.min_period_days
        )));
    }
    let shared = match config.mode {
        PeriodMode::PerUser => Some(dominant_period(&set.word_exposure, config.min_period_days)?),
        PeriodMode::PerFeature => None,
    };
    let mut periods = Vec::with_capacity(schema.len());
    let mut sequences = Vec::with_capacity(schema.len());
    for (row, def) in schema.features().iter().enumerate() {
        let series = set.row(row);
        let p = match shared {
            Some(p) => p,
            None => dominant_period(series, config.min_period_days)?,
        };
        sequences.push(resample_last_period(
            series,
            &set.word_exposure,
            p.period_days,
            def.aggregation,
        )?);
        periods.push(p);
    }
    Ok(UserSequences {
        user_id: set.user_id.clone(),
        label: set.label,
        periods,
        sequences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSmoothed {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<RiskLabel>,
    pub smoothed: Vec<SmoothedSequence>,
}

pub fn smooth_user(
    seqs: &UserSequences,
    schema: &FeatureSchema,
    smoother: &IntensitySmoother,
) -> Result<UserSmoothed> {
    if seqs.sequences.len() != schema.len() {
        return Err(Error::invalid(format!(
            "user {}: {} sequences, expected {}",
            seqs.user_id,
            seqs.sequences.len(),
            schema.len()
        )));
    }
    let smoothed = seqs
        .sequences
        .iter()
        .zip(schema.features())
        .map(|(s, def)| smoother.smooth(&CountingObservation::from_resampled(s, def.aggregation)?))
        .collect::<Result<_>>()?;
    Ok(UserSmoothed {
        user_id: seqs.user_id.clone(),
        label: seqs.label,
        smoothed,
    })
}

/// Descriptor rows of one user, one per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDescriptors {
    pub user_id: String,
    pub label: Option<RiskLabel>,
    pub rows: Vec<DescriptorRow>,
}

impl UserDescriptors {
    pub fn from_smoothed(s: &UserSmoothed) -> Self {
        Self {
            user_id: s.user_id.clone(),
            label: s.label,
            rows: s.smoothed.iter().map(describe).collect(),
        }
    }
}

/// Daily series straight to descriptor rows.
pub fn process_user(
    set: &DailySeriesSet,
    schema: &FeatureSchema,
    periods: &PeriodConfig,
    smoother: &IntensitySmoother,
) -> Result<UserDescriptors> {
    let seqs = user_sequences(set, schema, periods)?;
    Ok(UserDescriptors::from_smoothed(&smooth_user(
        &seqs, schema, smoother,
    )?))
}

/// Transpose users × features into one matrix per feature, in user order.
pub fn descriptor_matrices(
    users: &[UserDescriptors],
    schema: &FeatureSchema,
) -> Result<Vec<DescriptorMatrix>> {
    if let Some(u) = users.iter().find(|u| u.rows.len() != schema.len()) {
        return Err(Error::invalid(format!(
            "user {}: {} descriptor rows",
            u.user_id,
            u.rows.len()
        )));
    }
    let ids: Vec<String> = users.iter().map(|u| u.user_id.clone()).collect();
    Ok(schema
        .ids()
        .enumerate()
        .map(|(f, id)| DescriptorMatrix {
            feature: id.to_string(),
            users: ids.clone(),
            rows: users.iter().map(|u| u.rows[f]).collect(),
        })
        .collect())
}

/// One cluster model per matrix, fitted in parallel.
pub fn fit_all_clusters(
    matrices: &[DescriptorMatrix],
    config: &ClusterConfig,
    seed: u64,
) -> Result<Vec<ClusterModel>> {
    matrices
        .par_iter()
        .map(|m| fit_kmeans_auto(m, config, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synthesize_series, CohortSpec};
    use crate::intensity::KernelConfig;

    #[test]
    fn per_user_mode_shares_one_period() {
        let schema = FeatureSchema::default_schema();
        let spec = CohortSpec {
            n_per_label: [1, 0, 0],
            n_background: 0,
            ..Default::default()
        };
        let set = &synthesize_series(&spec, &schema).unwrap()[0];
        let cfg = PeriodConfig {
            mode: PeriodMode::PerUser,
            ..Default::default()
        };
        let s = user_sequences(set, &schema, &cfg).unwrap();
        assert!(s.periods.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(s.sequences.len(), schema.len());
    }

    #[test]
    fn short_series_rejected() {
        let schema = FeatureSchema::default_schema();
        let spec = CohortSpec {
            n_per_label: [1, 0, 0],
            n_background: 0,
            span_days: [8, 8],
            ..Default::default()
        };
        let set = &synthesize_series(&spec, &schema).unwrap()[0];
        assert!(user_sequences(set, &schema, &PeriodConfig::default()).is_err());
    }

    #[test]
    fn matrices_follow_user_order() {
        let schema = FeatureSchema::default_schema();
        let spec = CohortSpec {
            n_per_label: [2, 1, 0],
            n_background: 1,
            ..Default::default()
        };
        let smoother = IntensitySmoother::new(&KernelConfig::default()).unwrap();
        let users: Vec<UserDescriptors> = synthesize_series(&spec, &schema)
            .unwrap()
            .iter()
            .map(|s| process_user(s, &schema, &PeriodConfig::default(), &smoother).unwrap())
            .collect();
        let m = descriptor_matrices(&users, &schema).unwrap();
        assert_eq!(m.len(), 102);
        assert_eq!(
            m[5].users,
            vec!["l0_0000", "l0_0001", "l1_0000", "bg_00000"]
        );
        assert_eq!(m[5].rows[2], users[2].rows[5]);
        assert!(m.iter().all(|mm| mm.rows.iter().all(|r| r.is_finite())));
    }
}
