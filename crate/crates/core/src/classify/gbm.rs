use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{level_set, CvConfig, Dataset, UnseenLevel, CLASSES, MAX_LEVELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub n_trees: usize,
    /// Splits per tree; trees grow best-first.
    pub interaction_depth: usize,
    pub shrinkage: f64,
    pub min_obs_in_node: usize,
    pub unseen: UnseenLevel,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            interaction_depth: 1,
            shrinkage: 0.1,
            min_obs_in_node: 10,
            unseen: UnseenLevel::Right,
        }
    }
}

impl BoostParams {
    pub fn validate(&self, field: &str) -> Result<()> {
        if self.interaction_depth == 0 {
            return Err(Error::config(
                format!("{field}.interaction_depth"),
                "must be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::config(
                format!("{field}.shrinkage"),
                "must lie in [0, 1]",
            ));
        }
        if self.min_obs_in_node == 0 {
            return Err(Error::config(
                format!("{field}.min_obs_in_node"),
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Tuning grid; every combination is scored by cross-validated accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmGrid {
    pub n_trees: Vec<usize>,
    pub interaction_depth: Vec<usize>,
    pub shrinkage: Vec<f64>,
    pub min_obs_in_node: usize,
    pub unseen: UnseenLevel,
}

impl Default for GbmGrid {
    fn default() -> Self {
        Self {
            n_trees: vec![50, 100, 150],
            interaction_depth: vec![1, 2, 3],
            shrinkage: vec![0.1],
            min_obs_in_node: 10,
            unseen: UnseenLevel::Right,
        }
    }
}

impl GbmGrid {
    pub fn validate(&self) -> Result<()> {
        for (field, empty) in [
            ("train.gbm.n_trees", self.n_trees.is_empty()),
            (
                "train.gbm.interaction_depth",
                self.interaction_depth.is_empty(),
            ),
            ("train.gbm.shrinkage", self.shrinkage.is_empty()),
        ] {
            if empty {
                return Err(Error::config(field, "grid must not be empty"));
            }
        }
        if self.n_trees.contains(&0) {
            return Err(Error::config(
                "train.gbm.n_trees",
                "tree counts must be positive",
            ));
        }
        for &d in &self.interaction_depth {
            for &s in &self.shrinkage {
                self.params(1, d, s).validate("train.gbm")?;
            }
        }
        Ok(())
    }

    fn params(&self, n_trees: usize, depth: usize, shrinkage: f64) -> BoostParams {
        BoostParams {
            n_trees,
            interaction_depth: depth,
            shrinkage,
            min_obs_in_node: self.min_obs_in_node,
            unseen: self.unseen,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum RegNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        #[serde(with = "level_set")]
        left_levels: u64,
        #[serde(with = "level_set")]
        seen_levels: u64,
        /// Squared-error reduction of the split.
        improvement: f64,
        n_left: usize,
        n_right: usize,
        left: Box<RegNode>,
        right: Box<RegNode>,
    },
}

impl RegNode {
    fn eval(&self, row: &[usize], unseen: UnseenLevel) -> f64 {
        let mut node = self;
        loop {
            match node {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    left_levels,
                    seen_levels,
                    n_left,
                    n_right,
                    left,
                    right,
                    ..
                } => {
                    let bit = 1u64 << row[*feature];
                    let go_left = if left_levels & bit != 0 {
                        true
                    } else if seen_levels & bit != 0 {
                        false
                    } else {
                        unseen == UnseenLevel::MajorityChild && n_left > n_right
                    };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    fn visit_splits(&self, f: &mut impl FnMut(usize, f64)) {
        if let RegNode::Split {
            feature,
            improvement,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *improvement);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            RegNode::Leaf { value } => *value *= s,
            RegNode::Split { left, right, .. } => {
                left.scale(s);
                right.scale(s);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRow {
    pub n_trees: usize,
    pub interaction_depth: usize,
    pub shrinkage: f64,
    pub accuracy: f64,
    pub accuracy_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub features: Vec<String>,
    pub levels: Vec<usize>,
    pub params: BoostParams,
    /// Log class priors of the training data.
    pub init: [f64; CLASSES],
    /// One regression tree per class per iteration, leaf values already shrunk.
    pub trees: Vec<[RegNode; CLASSES]>,
    /// Multinomial deviance on the training data, before and after each iteration.
    pub train_deviance: Vec<f64>,
    #[serde(default)]
    pub tuning: Vec<TuningRow>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn softmax(f: &[f64; CLASSES]) -> [f64; CLASSES] {
    let m = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: [f64; CLASSES] = std::array::from_fn(|k| (f[k] - m).exp());
    let s: f64 = e.iter().sum();
    std::array::from_fn(|k| e[k] / s)
}

fn argmax(p: &[f64; CLASSES]) -> usize {
    let mut best = 0;
    for k in 1..CLASSES {
        if p[k] > p[best] {
            best = k;
        }
    }
    best
}

fn deviance(scores: &[[f64; CLASSES]], labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    scores
        .iter()
        .zip(labels)
        .map(|(f, &y)| {
            let m = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + f.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            -2.0 * (f[y] - lse)
        })
        .sum::<f64>()
        / n
}

struct Split {
    feature: usize,
    left: u64,
    seen: u64,
    improvement: f64,
}

fn best_regression_split(
    data: &Dataset,
    rows: &[usize],
    r: &[f64],
    min_obs: usize,
) -> Option<Split> {
    if rows.len() < 2 * min_obs {
        return None;
    }
    let mut best: Option<Split> = None;
    let mut sums = [0.0f64; MAX_LEVELS + 1];
    let mut cnts = [0usize; MAX_LEVELS + 1];
    let n = rows.len() as f64;
    let total: f64 = rows.iter().map(|&i| r[i]).sum();
    for (f, col) in data.columns.iter().enumerate() {
        let k = data.levels[f];
        sums[..=k].fill(0.0);
        cnts[..=k].fill(0);
        for &i in rows {
            let l = col[i] as usize;
            sums[l] += r[i];
            cnts[l] += 1;
        }
        let mut present: Vec<usize> = (1..=k).filter(|&l| cnts[l] > 0).collect();
        if present.len() < 2 {
            continue;
        }
        present.sort_by(|&a, &b| {
            (sums[a] / cnts[a] as f64)
                .partial_cmp(&(sums[b] / cnts[b] as f64))
                .unwrap()
                .then(a.cmp(&b))
        });
        let seen = super::mask_of(present.iter().copied());
        let (mut sl, mut nl, mut mask) = (0.0, 0usize, 0u64);
        for &lvl in &present[..present.len() - 1] {
            sl += sums[lvl];
            nl += cnts[lvl];
            mask |= 1u64 << lvl;
            let nr = rows.len() - nl;
            if nl < min_obs || nr < min_obs {
                continue;
            }
            let (ml, mr) = (sl / nl as f64, (total - sl) / nr as f64);
            let imp = nl as f64 * nr as f64 / n * (ml - mr) * (ml - mr);
            if imp > 1e-14 && best.as_ref().is_none_or(|b| imp > b.improvement + 1e-12) {
                best = Some(Split {
                    feature: f,
                    left: mask,
                    seen,
                    improvement: imp,
                });
            }
        }
    }
    best
}

struct Pending {
    rows: Vec<usize>,
    split: Option<Split>,
    children: Option<(usize, usize)>,
}

/// Best-first regression tree on residuals `r` with Newton leaf values.
fn grow_tree(data: &Dataset, rows: Vec<usize>, r: &[f64], params: &BoostParams) -> RegNode {
    let min_obs = params.min_obs_in_node;
    let split = best_regression_split(data, &rows, r, min_obs);
    let mut arena = vec![Pending {
        rows,
        split,
        children: None,
    }];
    for _ in 0..params.interaction_depth {
        let mut pick: Option<usize> = None;
        for (i, p) in arena.iter().enumerate() {
            if p.children.is_some() {
                continue;
            }
            if let Some(s) = &p.split {
                if pick.is_none_or(|j| s.improvement > arena[j].split.as_ref().unwrap().improvement)
                {
                    pick = Some(i);
                }
            }
        }
        let Some(i) = pick else { break };
        let (feature, left) = {
            let s = arena[i].split.as_ref().unwrap();
            (s.feature, s.left)
        };
        let col = &data.columns[feature];
        let (lr, rr): (Vec<usize>, Vec<usize>) = arena[i]
            .rows
            .iter()
            .partition(|&&j| left & (1u64 << col[j]) != 0);
        let ls = best_regression_split(data, &lr, r, min_obs);
        let rs = best_regression_split(data, &rr, r, min_obs);
        let n = arena.len();
        arena.push(Pending {
            rows: lr,
            split: ls,
            children: None,
        });
        arena.push(Pending {
            rows: rr,
            split: rs,
            children: None,
        });
        arena[i].children = Some((n, n + 1));
    }
    build(&arena, 0, r)
}

fn build(arena: &[Pending], i: usize, r: &[f64]) -> RegNode {
    let p = &arena[i];
    match p.children {
        None => {
            let (mut num, mut den) = (0.0, 0.0);
            for &j in &p.rows {
                num += r[j];
                den += r[j].abs() * (1.0 - r[j].abs());
            }
            let k = CLASSES as f64;
            let value = if den > 1e-12 {
                ((k - 1.0) / k * num / den).clamp(-20.0, 20.0)
            } else {
                0.0
            };
            RegNode::Leaf { value }
        }
        Some((l, rgt)) => {
            let s = p.split.as_ref().unwrap();
            RegNode::Split {
                feature: s.feature,
                left_levels: s.left,
                seen_levels: s.seen,
                improvement: s.improvement,
                n_left: arena[l].rows.len(),
                n_right: arena[rgt].rows.len(),
                left: Box::new(build(arena, l, r)),
                right: Box::new(build(arena, rgt, r)),
            }
        }
    }
}

/// Multinomial boosting without subsampling. Each iteration's step is halved
/// until the training deviance does not increase.
pub fn fit_gbm(data: &Dataset, params: &BoostParams) -> Result<BoostModel> {
    params.validate("train.gbm")?;
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::invalid("cannot boost on zero rows"));
    }
    let counts = data.class_counts();
    let init: [f64; CLASSES] =
        std::array::from_fn(|k| (counts[k] as f64 / n as f64).max(1e-6).ln());
    let rows: Vec<Vec<usize>> = (0..n).map(|i| data.row(i)).collect();
    let mut scores = vec![init; n];
    let mut dev = deviance(&scores, &data.labels);
    let mut train_deviance = vec![dev];
    let mut trees = Vec::with_capacity(params.n_trees);
    let all: Vec<usize> = (0..n).collect();
    for _ in 0..params.n_trees {
        let probs: Vec<[f64; CLASSES]> = scores.iter().map(softmax).collect();
        let mut iteration: [RegNode; CLASSES] =
            std::array::from_fn(|_| RegNode::Leaf { value: 0.0 });
        for (k, tree) in iteration.iter_mut().enumerate() {
            let r: Vec<f64> = (0..n)
                .map(|i| f64::from(u8::from(data.labels[i] == k)) - probs[i][k])
                .collect();
            *tree = grow_tree(data, all.clone(), &r, params);
        }
        let delta: Vec<[f64; CLASSES]> = rows
            .iter()
            .map(|row| {
                std::array::from_fn(|k| params.shrinkage * iteration[k].eval(row, params.unseen))
            })
            .collect();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<[f64; CLASSES]> = scores
                .iter()
                .zip(&delta)
                .map(|(s, d)| std::array::from_fn(|k| s[k] + step * d[k]))
                .collect();
            let d = deviance(&trial, &data.labels);
            if d <= dev {
                accepted = Some((trial, d));
                break;
            }
            step *= 0.5;
        }
        let factor = match accepted {
            Some((trial, d)) => {
                scores = trial;
                dev = d;
                params.shrinkage * step
            }
            None => 0.0,
        };
        for t in &mut iteration {
            t.scale(factor);
        }
        train_deviance.push(dev);
        trees.push(iteration);
    }
    Ok(BoostModel {
        features: data.features.clone(),
        levels: data.levels.clone(),
        params: params.clone(),
        init,
        trees,
        train_deviance,
        tuning: Vec::new(),
        warnings: Vec::new(),
    })
}

impl BoostModel {
    fn check_row(&self, row: &[usize]) -> Result<()> {
        if row.len() != self.features.len() {
            return Err(Error::invalid(format!(
                "row has {} values, model uses {} features",
                row.len(),
                self.features.len()
            )));
        }
        if let Some(f) = row.iter().position(|&v| v == 0 || v > MAX_LEVELS) {
            return Err(Error::invalid(format!(
                "missing level for {}",
                self.features[f]
            )));
        }
        Ok(())
    }

    fn scores_after(&self, row: &[usize], n_trees: usize) -> [f64; CLASSES] {
        let mut f = self.init;
        for it in &self.trees[..n_trees.min(self.trees.len())] {
            for k in 0..CLASSES {
                f[k] += it[k].eval(row, self.params.unseen);
            }
        }
        f
    }

    pub fn predict_proba(&self, row: &[usize]) -> Result<[f64; CLASSES]> {
        self.check_row(row)?;
        Ok(softmax(&self.scores_after(row, self.trees.len())))
    }

    /// Most probable class; ties go to the smaller label.
    pub fn predict_row(&self, row: &[usize]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(row)?))
    }

    fn mapped_rows(&self, data: &Dataset) -> Result<Vec<Vec<usize>>> {
        let idx = data.feature_indices(&self.features)?;
        Ok((0..data.n_rows())
            .map(|i| idx.iter().map(|&f| data.columns[f][i] as usize).collect())
            .collect())
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<usize>> {
        self.mapped_rows(data)?
            .iter()
            .map(|r| self.predict_row(r))
            .collect()
    }

    /// Accuracy on `data` after each tree count in `checkpoints` (ascending).
    pub fn staged_accuracy(&self, data: &Dataset, checkpoints: &[usize]) -> Result<Vec<f64>> {
        let rows = self.mapped_rows(data)?;
        for r in &rows {
            self.check_row(r)?;
        }
        let mut scores = vec![self.init; rows.len()];
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut done = 0;
        for &c in checkpoints {
            let c = c.min(self.trees.len());
            for it in &self.trees[done.min(c)..c] {
                for (s, r) in scores.iter_mut().zip(&rows) {
                    for k in 0..CLASSES {
                        s[k] += it[k].eval(r, self.params.unseen);
                    }
                }
            }
            done = done.max(c);
            let correct = scores
                .iter()
                .zip(&data.labels)
                .filter(|(s, &y)| argmax(&softmax(s)) == y)
                .count();
            out.push(correct as f64 / rows.len().max(1) as f64);
        }
        Ok(out)
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer(out, self).map_err(|e| Error::json("writing boosted model", e))
    }
}

/// Cross-validated grid search, then a refit of the best combination on all of `data`.
/// Ties prefer fewer trees, then shallower trees, then smaller shrinkage.
pub fn fit_gbm_cv(data: &Dataset, grid: &GbmGrid, cv: &CvConfig, seed: u64) -> Result<BoostModel> {
    grid.validate()?;
    cv.validate()?;
    let mut warnings = Vec::new();
    let counts = data.class_counts();
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 && c < cv.folds {
            warnings.push(format!(
                "class {k} has {c} rows, fewer than {} folds",
                cv.folds
            ));
        }
    }
    let mut checkpoints = grid.n_trees.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let max_trees = *checkpoints.last().unwrap();
    let mut depths = grid.interaction_depth.clone();
    depths.sort_unstable();
    depths.dedup();
    let mut shrinks = grid.shrinkage.clone();
    shrinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    shrinks.dedup();

    let parts = cv.partitions(&data.labels, seed);
    if parts.is_empty() {
        return Err(Error::invalid("cross-validation produced no usable folds"));
    }
    let folds: Vec<(Dataset, Dataset)> = parts
        .iter()
        .map(|(tr, te)| (data.subset_rows(tr), data.subset_rows(te)))
        .collect();
    let combos: Vec<(usize, f64)> = depths
        .iter()
        .flat_map(|&d| shrinks.iter().map(move |&s| (d, s)))
        .collect();
    let tasks: Vec<(usize, usize)> = (0..combos.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let staged: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(c, f)| {
            let (d, s) = combos[c];
            let model = fit_gbm(&folds[f].0, &grid.params(max_trees, d, s))?;
            model.staged_accuracy(&folds[f].1, &checkpoints)
        })
        .collect::<Result<_>>()?;

    let mut tuning = Vec::new();
    for (ci, &(d, s)) in combos.iter().enumerate() {
        for (ti, &t) in checkpoints.iter().enumerate() {
            let accs: Vec<f64> = (0..folds.len())
                .map(|f| staged[ci * folds.len() + f][ti])
                .collect();
            let m = accs.iter().sum::<f64>() / accs.len() as f64;
            let sd = if accs.len() > 1 {
                (accs.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (accs.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            tuning.push(TuningRow {
                n_trees: t,
                interaction_depth: d,
                shrinkage: s,
                accuracy: m,
                accuracy_sd: sd,
            });
        }
    }
    let mut order: Vec<usize> = (0..tuning.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&tuning[a], &tuning[b]);
        x.n_trees
            .cmp(&y.n_trees)
            .then(x.interaction_depth.cmp(&y.interaction_depth))
            .then(x.shrinkage.partial_cmp(&y.shrinkage).unwrap())
    });
    let mut best = order[0];
    for &i in &order[1..] {
        if tuning[i].accuracy > tuning[best].accuracy + 1e-12 {
            best = i;
        }
    }
    let chosen = &tuning[best];
    let mut model = fit_gbm(
        data,
        &grid.params(chosen.n_trees, chosen.interaction_depth, chosen.shrinkage),
    )?;
    model.tuning = tuning;
    model.warnings = warnings;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEntry {
    pub feature: String,
    pub percent: f64,
}

/// Relative influence, largest first; ties keep the model's feature order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub entries: Vec<InfluenceEntry>,
}

impl InfluenceReport {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.percent).sum()
    }

    /// Up to `n` features with positive influence.
    pub fn top(&self, n: usize) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.percent > 0.0)
            .take(n)
            .map(|e| e.feature.as_str())
            .collect()
    }

    pub fn get(&self, feature: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.feature == feature)
            .map(|e| e.percent)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let io = |e| Error::io("writing influence csv", e);
        writeln!(out, "feature,percent").map_err(io)?;
        for e in &self.entries {
            writeln!(out, "{},{}", e.feature, e.percent).map_err(io)?;
        }
        Ok(())
    }
}

/// Squared-error improvement of every split, summed per feature over all trees
/// and scaled to total 100. A model without splits gives an empty report.
pub fn relative_influence(model: &BoostModel) -> InfluenceReport {
    let mut acc = vec![0.0; model.features.len()];
    for it in &model.trees {
        for t in it {
            t.visit_splits(&mut |f, imp| acc[f] += imp);
        }
    }
    let total: f64 = acc.iter().sum();
    if total <= 0.0 {
        return InfluenceReport::default();
    }
    let mut order: Vec<usize> = (0..acc.len()).collect();
    order.sort_by(|&a, &b| acc[b].partial_cmp(&acc[a]).unwrap());
    InfluenceReport {
        entries: order
            .into_iter()
            .map(|f| InfluenceEntry {
                feature: model.features[f].clone(),
                percent: 100.0 * acc[f] / total,
            })
            .collect(),
    }
}
