use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gbm::{fit_gbm, relative_influence, BoostParams};
use super::{CvConfig, Dataset};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfeConfig {
    /// Candidate subset sizes; the full feature set is always evaluated too.
    pub sizes: Vec<usize>,
    pub model: BoostParams,
}

impl Default for RfeConfig {
    fn default() -> Self {
        Self {
            sizes: vec![5, 10, 20, 50],
            model: BoostParams::default(),
        }
    }
}

impl RfeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.contains(&0) {
            return Err(Error::config(
                "train.rfe.sizes",
                "subset sizes must be positive",
            ));
        }
        self.model.validate("train.rfe.model")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Feature names, most influential first.
    pub ranking: Vec<String>,
    /// `(subset size, mean CV accuracy)` in ascending size.
    pub accuracy_by_size: Vec<(usize, f64)>,
    /// Selected column indices in the input's column order.
    pub selected: Vec<usize>,
}

/// Rank by influence of one boosted fit on all of `data`, then keep the
/// top-ranked subset with the best cross-validated accuracy (ties: smaller).
pub fn rfe_select(
    data: &Dataset,
    config: &RfeConfig,
    cv: &CvConfig,
    seed: u64,
) -> Result<RfeResult> {
    config.validate()?;
    cv.validate()?;
    let p = data.n_features();
    if p == 0 || data.n_rows() == 0 {
        return Err(Error::invalid(
            "feature selection needs at least one row and one feature",
        ));
    }
    let full = fit_gbm(data, &config.model)?;
    let influence = relative_influence(&full);
    let mut ranking: Vec<usize> = influence
        .entries
        .iter()
        .filter_map(|e| data.features.iter().position(|f| *f == e.feature))
        .collect();
    for f in 0..p {
        if !ranking.contains(&f) {
            ranking.push(f);
        }
    }

    let mut sizes: Vec<usize> = config.sizes.iter().copied().filter(|&s| s < p).collect();
    sizes.push(p);
    sizes.sort_unstable();
    sizes.dedup();

    let parts = cv.partitions(&data.labels, derive_seed(seed, "rfe", 0));
    let tasks: Vec<(usize, usize)> = (0..sizes.len())
        .flat_map(|s| (0..parts.len()).map(move |f| (s, f)))
        .collect();
    let accs: Vec<f64> = tasks
        .par_iter()
        .map(|&(si, fi)| {
            let mut feats = ranking[..sizes[si]].to_vec();
            feats.sort_unstable();
            let sub = data.select_features(&feats);
            let (tr, te) = &parts[fi];
            let model = fit_gbm(&sub.subset_rows(tr), &config.model)?;
            let test = sub.subset_rows(te);
            let pred = model.predict_dataset(&test)?;
            Ok(pred
                .iter()
                .zip(&test.labels)
                .filter(|(a, b)| a == b)
                .count() as f64
                / te.len() as f64)
        })
        .collect::<Result<_>>()?;

    let nf = parts.len().max(1);
    let accuracy_by_size: Vec<(usize, f64)> = sizes
        .iter()
        .enumerate()
        .map(|(si, &s)| {
            (
                s,
                accs[si * nf..(si + 1) * nf].iter().sum::<f64>() / nf as f64,
            )
        })
        .collect();
    let mut best = 0;
    for i in 1..accuracy_by_size.len() {
        if accuracy_by_size[i].1 > accuracy_by_size[best].1 + 1e-12 {
            best = i;
        }
    }
    let mut selected = ranking[..accuracy_by_size[best].0].to_vec();
    selected.sort_unstable();
    Ok(RfeResult {
        ranking: ranking.iter().map(|&f| data.features[f].clone()).collect(),
        accuracy_by_size,
        selected,
    })
}
