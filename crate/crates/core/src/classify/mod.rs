//! Tree classifiers on the nominal cluster-membership table.
//!
//! Every column is an unordered factor with levels `1..=k`; level sets are
//! stored as bit masks (bit `l` for level `l`), so a feature has at most 63 levels.

mod cart;
mod gbm;
mod render;
mod rfe;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::clustering::LabeledNominalMatrix;
use crate::error::{Error, Result};
use crate::metrics::{confusion, ConfusionMatrix};
use crate::seed::rng_for;

pub use cart::{fit_cart, CartNode, CartParams, TreeModel};
pub use gbm::{
    fit_gbm, fit_gbm_cv, relative_influence, BoostModel, BoostParams, GbmGrid, InfluenceReport,
    RegNode, TuningRow,
};
pub use render::{tree_to_dot, tree_to_svg};
pub use rfe::{rfe_select, RfeConfig, RfeResult};

pub const CLASSES: usize = 3;
pub const MAX_LEVELS: usize = 63;

/// Where a row goes when it carries a level the node never saw in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnseenLevel {
    #[default]
    Right,
    MajorityChild,
}

pub(crate) fn mask_of(levels: impl IntoIterator<Item = usize>) -> u64 {
    levels.into_iter().fold(0, |m, l| m | (1u64 << l))
}

pub(crate) fn levels_of(mask: u64) -> Vec<usize> {
    (0..64).filter(|l| mask & (1u64 << l) != 0).collect()
}

/// Serialize level masks as sorted level lists.
pub(crate) mod level_set {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(mask: &u64, s: S) -> Result<S::Ok, S::Error> {
        super::levels_of(*mask).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let levels = Vec::<usize>::deserialize(d)?;
        if let Some(&l) = levels.iter().find(|&&l| l == 0 || l > super::MAX_LEVELS) {
            return Err(serde::de::Error::custom(format!("level {l} out of range")));
        }
        Ok(super::mask_of(levels))
    }
}

/// Column-major nominal data with labels in `0..3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<String>,
    pub levels: Vec<usize>,
    /// `columns[f][row]`, levels in `1..=levels[f]`.
    pub columns: Vec<Vec<u8>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        features: Vec<String>,
        levels: Vec<usize>,
        rows: &[Vec<usize>],
        labels: Vec<usize>,
    ) -> Result<Self> {
        if features.len() != levels.len() {
            return Err(Error::invalid("feature and level counts differ"));
        }
        if rows.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= CLASSES) {
            return Err(Error::invalid(format!("label {l} outside 0..{CLASSES}")));
        }
        if let Some(&k) = levels.iter().find(|&&k| k == 0 || k > MAX_LEVELS) {
            return Err(Error::invalid(format!(
                "level count {k} outside 1..={MAX_LEVELS}"
            )));
        }
        let mut columns = vec![Vec::with_capacity(rows.len()); features.len()];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != features.len() {
                return Err(Error::invalid(format!("row {r} has {} values", row.len())));
            }
            for (f, &v) in row.iter().enumerate() {
                if v == 0 || v > levels[f] {
                    return Err(Error::invalid(format!(
                        "row {r}, {}: level {v} outside 1..={}",
                        features[f], levels[f]
                    )));
                }
                columns[f].push(v as u8);
            }
        }
        Ok(Self {
            features,
            levels,
            columns,
            labels,
        })
    }

    pub fn from_nominal(m: &LabeledNominalMatrix) -> Result<Self> {
        Self::new(
            m.features.clone(),
            m.levels.clone(),
            &m.values,
            m.labels.iter().map(|l| l.index()).collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn row(&self, i: usize) -> Vec<usize> {
        self.columns.iter().map(|c| c[i] as usize).collect()
    }

    pub fn subset_rows(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.clone(),
            levels: self.levels.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn select_features(&self, feats: &[usize]) -> Self {
        Self {
            features: feats.iter().map(|&f| self.features[f].clone()).collect(),
            levels: feats.iter().map(|&f| self.levels[f]).collect(),
            columns: feats.iter().map(|&f| self.columns[f].clone()).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn class_counts(&self) -> [usize; CLASSES] {
        let mut c = [0; CLASSES];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Column indices of `names` in this dataset.
    pub fn feature_indices(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.features
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::invalid(format!("feature `{n}` missing from data")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    #[default]
    Stratified,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Train/test partition; stratified plans take `round(fraction * count)` rows of each label.
pub fn split_plan(
    labels: &[usize],
    fraction: f64,
    strategy: SplitStrategy,
    seed: u64,
) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config("train.train_fraction", "must lie in (0, 1)"));
    }
    let mut train = Vec::new();
    match strategy {
        SplitStrategy::Stratified => {
            for class in 0..CLASSES {
                let mut idx: Vec<usize> =
                    (0..labels.len()).filter(|&i| labels[i] == class).collect();
                idx.shuffle(&mut rng_for(seed, "split", class as u64));
                let take = (fraction * idx.len() as f64).round() as usize;
                train.extend_from_slice(&idx[..take]);
            }
        }
        SplitStrategy::Random => {
            let mut idx: Vec<usize> = (0..labels.len()).collect();
            idx.shuffle(&mut rng_for(seed, "split", u64::MAX));
            let take = (fraction * idx.len() as f64).round() as usize;
            train.extend_from_slice(&idx[..take]);
        }
    }
    train.sort_unstable();
    let test = (0..labels.len())
        .filter(|i| train.binary_search(i).is_err())
        .collect();
    Ok(SplitPlan { train, test, seed })
}

/// Stratified fold ids in `0..folds`: each label's rows are shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64, repeat: u64) -> Vec<usize> {
    let mut out = vec![0; labels.len()];
    let mut rng = rng_for(seed, "cv", repeat);
    let mut next = 0;
    for class in 0..CLASSES {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            out[i] = next % folds;
            next += 1;
        }
    }
    out
}

/// Resampling plan for cross-validated tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            repeats: 1,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::config("train.cv.folds", "need at least 2 folds"));
        }
        if self.repeats == 0 {
            return Err(Error::config("train.cv.repeats", "need at least 1 repeat"));
        }
        Ok(())
    }

    /// `(train rows, held-out rows)` for every fold of every repeat.
    pub fn partitions(&self, labels: &[usize], seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut out = Vec::new();
        for r in 0..self.repeats {
            let ids = stratified_folds(labels, self.folds, seed, r as u64);
            for f in 0..self.folds {
                let (mut tr, mut te) = (Vec::new(), Vec::new());
                for (i, &id) in ids.iter().enumerate() {
                    if id == f {
                        te.push(i)
                    } else {
                        tr.push(i)
                    }
                }
                if !te.is_empty() && !tr.is_empty() {
                    out.push((tr, te));
                }
            }
        }
        out
    }
}

/// Near-zero-variance screen: keeps columns unless they are constant, or their
/// most/second-most frequent level ratio exceeds 19 while fewer than 10% of
/// values are distinct.
pub fn nzv_filter(data: &Dataset) -> Vec<usize> {
    let n = data.n_rows();
    (0..data.n_features())
        .filter(|&f| {
            let mut counts = vec![0usize; data.levels[f] + 1];
            for &v in &data.columns[f] {
                counts[v as usize] += 1;
            }
            counts.sort_unstable_by(|a, b| b.cmp(a));
            if counts.len() < 2 || counts[1] == 0 {
                return false;
            }
            let distinct = counts.iter().filter(|&&c| c > 0).count();
            let ratio = counts[0] as f64 / counts[1] as f64;
            let pct_unique = 100.0 * distinct as f64 / n as f64;
            !(ratio > 19.0 && pct_unique < 10.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub split: SplitStrategy,
    pub train_fraction: f64,
    pub nzv: bool,
    pub rfe: Option<RfeConfig>,
    pub cart: CartParams,
    pub gbm: GbmGrid,
    pub cv: CvConfig,
    /// Repeated full trainings used for the influence appearance count.
    pub influence_repeats: usize,
    pub influence_top: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            split: SplitStrategy::Stratified,
            train_fraction: 0.75,
            nzv: true,
            rfe: Some(RfeConfig::default()),
            cart: CartParams::default(),
            gbm: GbmGrid::default(),
            cv: CvConfig::default(),
            influence_repeats: 10,
            influence_top: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train.train_fraction", "must lie in (0, 1)"));
        }
        self.cart.validate()?;
        self.gbm.validate()?;
        self.cv.validate()?;
        if let Some(r) = &self.rfe {
            r.validate()?;
        }
        if self.influence_top == 0 {
            return Err(Error::config("train.influence_top", "must be at least 1"));
        }
        Ok(())
    }
}

/// Everything one training run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub plan: SplitPlan,
    /// Features surviving the variance screen.
    pub retained: Vec<String>,
    /// Features used by both models.
    pub selected: Vec<String>,
    pub rfe: Option<RfeResult>,
    pub cart: TreeModel,
    pub gbm: BoostModel,
    pub influence: InfluenceReport,
}

/// Split, screen, select and fit both models on the training part of `data`.
pub fn train(data: &Dataset, config: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    config.validate()?;
    let plan = split_plan(&data.labels, config.train_fraction, config.split, seed)?;
    let train_data = data.subset_rows(&plan.train);
    let retained_idx = if config.nzv {
        nzv_filter(&train_data)
    } else {
        (0..data.n_features()).collect()
    };
    if retained_idx.is_empty() {
        return Err(Error::invalid(
            "every feature was removed by the variance screen",
        ));
    }
    let screened = train_data.select_features(&retained_idx);
    let (selected_data, rfe) = match &config.rfe {
        Some(rc) => {
            let r = rfe_select(&screened, rc, &config.cv, seed)?;
            (screened.select_features(&r.selected), Some(r))
        }
        None => (screened.clone(), None),
    };
    let cart = fit_cart(&selected_data, &config.cart)?;
    let gbm = fit_gbm_cv(&selected_data, &config.gbm, &config.cv, seed)?;
    let influence = relative_influence(&gbm);
    Ok(TrainOutcome {
        retained: screened.features.clone(),
        selected: selected_data.features.clone(),
        plan,
        rfe,
        cart,
        gbm,
        influence,
    })
}

/// Confusion matrices `(cart, gbm)` on the held-out rows of the outcome's plan.
pub fn evaluate(
    outcome: &TrainOutcome,
    data: &Dataset,
) -> Result<(ConfusionMatrix, ConfusionMatrix)> {
    let test = data.subset_rows(&outcome.plan.test);
    let cart = confusion(&outcome.cart.predict_dataset(&test)?, &test.labels)?;
    let gbm = confusion(&outcome.gbm.predict_dataset(&test)?, &test.labels)?;
    Ok((cart, gbm))
}

/// How often each feature lands in the top influence list over repeated trainings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceFrequency {
    pub repeats: usize,
    pub top: usize,
    /// `(feature, appearances)`, most frequent first; ties keep column order.
    pub counts: Vec<(String, usize)>,
}

pub fn influence_frequency(
    data: &Dataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<InfluenceFrequency> {
    let mut counts = vec![0usize; data.n_features()];
    for r in 0..config.influence_repeats {
        let outcome = train(
            data,
            config,
            crate::seed::derive_seed(seed, "influence", r as u64),
        )?;
        for name in outcome.influence.top(config.influence_top) {
            if let Some(f) = data.features.iter().position(|x| x == name) {
                counts[f] += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..data.n_features()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    Ok(InfluenceFrequency {
        repeats: config.influence_repeats,
        top: config.influence_top,
        counts: order
            .into_iter()
            .map(|f| (data.features[f].clone(), counts[f]))
            .collect(),
    })
}
