use serde::{Deserialize, Serialize};

use super::{level_set, Dataset, UnseenLevel, CLASSES};
use crate::error::{Error, Result};

/// Exhaustive subset search is capped at this many levels per node.
const MAX_SEARCH_LEVELS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartParams {
    pub min_split: usize,
    /// Smallest child size; `None` means `max(1, round(min_split / 3))`.
    pub min_leaf: Option<usize>,
    /// A split must remove at least `cp` times the root node's impurity.
    pub cp: f64,
    pub max_depth: usize,
    pub unseen: UnseenLevel,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            min_split: 5,
            min_leaf: None,
            cp: 0.01,
            max_depth: 30,
            unseen: UnseenLevel::Right,
        }
    }
}

impl CartParams {
    pub fn min_leaf(&self) -> usize {
        self.min_leaf
            .unwrap_or_else(|| ((self.min_split as f64 / 3.0).round() as usize).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_split < 2 {
            return Err(Error::config("train.cart.min_split", "must be at least 2"));
        }
        if self.min_leaf == Some(0) {
            return Err(Error::config("train.cart.min_leaf", "must be at least 1"));
        }
        if !(self.cp >= 0.0) {
            return Err(Error::config("train.cart.cp", "must be nonnegative"));
        }
        if self.max_depth == 0 {
            return Err(Error::config("train.cart.max_depth", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum CartNode {
    Leaf {
        counts: [usize; CLASSES],
        class: usize,
    },
    Split {
        feature: usize,
        #[serde(with = "level_set")]
        left_levels: u64,
        /// Levels present at this node during training.
        #[serde(with = "level_set")]
        seen_levels: u64,
        counts: [usize; CLASSES],
        class: usize,
        /// Gini impurity removed by the split, in row units.
        improvement: f64,
        left: Box<CartNode>,
        right: Box<CartNode>,
    },
}

impl CartNode {
    pub fn counts(&self) -> &[usize; CLASSES] {
        match self {
            CartNode::Leaf { counts, .. } | CartNode::Split { counts, .. } => counts,
        }
    }

    pub fn class(&self) -> usize {
        match self {
            CartNode::Leaf { class, .. } | CartNode::Split { class, .. } => *class,
        }
    }

    fn size(&self) -> usize {
        self.counts().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub features: Vec<String>,
    pub levels: Vec<usize>,
    pub params: CartParams,
    pub root: CartNode,
}

fn majority(counts: &[usize; CLASSES]) -> usize {
    let mut best = 0;
    for c in 1..CLASSES {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

/// `n * Gini` of a count vector.
fn risk(counts: &[usize; CLASSES]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let sq: usize = counts.iter().map(|c| c * c).sum();
    n as f64 - sq as f64 / n as f64
}

struct Grower<'a> {
    data: &'a Dataset,
    params: &'a CartParams,
    min_leaf: usize,
    root_risk: f64,
}

impl Grower<'_> {
    fn grow(&self, rows: &[usize], depth: usize) -> CartNode {
        let mut counts = [0; CLASSES];
        for &i in rows {
            counts[self.data.labels[i]] += 1;
        }
        let class = majority(&counts);
        let leaf = CartNode::Leaf { counts, class };
        let node_risk = risk(&counts);
        if node_risk <= 0.0 || rows.len() < self.params.min_split || depth >= self.params.max_depth
        {
            return leaf;
        }
        let Some((feature, left_levels, seen_levels, improvement)) =
            self.best_split(rows, node_risk)
        else {
            return leaf;
        };
        if improvement < self.params.cp * self.root_risk {
            return leaf;
        }
        let col = &self.data.columns[feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| left_levels & (1u64 << col[i]) != 0);
        CartNode::Split {
            feature,
            left_levels,
            seen_levels,
            counts,
            class,
            improvement,
            left: Box::new(self.grow(&l, depth + 1)),
            right: Box::new(self.grow(&r, depth + 1)),
        }
    }

    fn best_split(&self, rows: &[usize], node_risk: f64) -> Option<(usize, u64, u64, f64)> {
        let mut best: Option<(usize, u64, u64, f64)> = None;
        for (f, col) in self.data.columns.iter().enumerate() {
            let mut lc = vec![[0usize; CLASSES]; self.data.levels[f] + 1];
            for &i in rows {
                lc[col[i] as usize][self.data.labels[i]] += 1;
            }
            let present: Vec<usize> = (1..lc.len())
                .filter(|&l| lc[l].iter().any(|&c| c > 0))
                .collect();
            if present.len() < 2 {
                continue;
            }
            let seen = super::mask_of(present.iter().copied());
            let others = &present[1..];
            let full = (1u64 << others.len()) - 1;
            for sub in 0..full {
                let mut left = lc[present[0]];
                let mut mask = 1u64 << present[0];
                for (j, &lvl) in others.iter().enumerate() {
                    if sub & (1 << j) != 0 {
                        mask |= 1u64 << lvl;
                        for c in 0..CLASSES {
                            left[c] += lc[lvl][c];
                        }
                    }
                }
                let total: [usize; CLASSES] =
                    std::array::from_fn(|c| present.iter().map(|&l| lc[l][c]).sum::<usize>());
                let right: [usize; CLASSES] = std::array::from_fn(|c| total[c] - left[c]);
                let (nl, nr) = (left.iter().sum::<usize>(), right.iter().sum::<usize>());
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let imp = node_risk - risk(&left) - risk(&right);
                if best.is_none_or(|b| imp > b.3 + 1e-12) {
                    best = Some((f, mask, seen, imp.max(0.0)));
                }
            }
        }
        best
    }
}

pub fn fit_cart(data: &Dataset, params: &CartParams) -> Result<TreeModel> {
    params.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::invalid("cannot fit a tree to zero rows"));
    }
    if let Some(&k) = data.levels.iter().find(|&&k| k > MAX_SEARCH_LEVELS) {
        return Err(Error::invalid(format!(
            "tree search supports at most {MAX_SEARCH_LEVELS} levels per feature, got {k}"
        )));
    }
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let grower = Grower {
        data,
        params,
        min_leaf: params.min_leaf(),
        root_risk: risk(&data.class_counts()),
    };
    Ok(TreeModel {
        features: data.features.clone(),
        levels: data.levels.clone(),
        params: params.clone(),
        root: grower.grow(&rows, 0),
    })
}

impl TreeModel {
    /// Class of the leaf reached by `row`, given in this model's feature order.
    pub fn predict_row(&self, row: &[usize]) -> Result<usize> {
        if row.len() != self.features.len() {
            return Err(Error::invalid(format!(
                "row has {} values, model uses {} features",
                row.len(),
                self.features.len()
            )));
        }
        let mut node = &self.root;
        loop {
            match node {
                CartNode::Leaf { class, .. } => return Ok(*class),
                CartNode::Split {
                    feature,
                    left_levels,
                    seen_levels,
                    left,
                    right,
                    ..
                } => {
                    let v = row[*feature];
                    if v == 0 || v > super::MAX_LEVELS {
                        return Err(Error::invalid(format!(
                            "missing level for {}",
                            self.features[*feature]
                        )));
                    }
                    let bit = 1u64 << v;
                    node = if left_levels & bit != 0 {
                        left
                    } else if seen_levels & bit != 0 {
                        right
                    } else {
                        match self.params.unseen {
                            UnseenLevel::Right => right,
                            UnseenLevel::MajorityChild => {
                                if left.size() > right.size() {
                                    left
                                } else {
                                    right
                                }
                            }
                        }
                    };
                }
            }
        }
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<usize>> {
        let idx = data.feature_indices(&self.features)?;
        (0..data.n_rows())
            .map(|i| {
                let row: Vec<usize> = idx.iter().map(|&f| data.columns[f][i] as usize).collect();
                self.predict_row(&row)
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        fn d(n: &CartNode) -> usize {
            match n {
                CartNode::Leaf { .. } => 0,
                CartNode::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }

    pub fn n_leaves(&self) -> usize {
        fn c(n: &CartNode) -> usize {
            match n {
                CartNode::Leaf { .. } => 1,
                CartNode::Split { left, right, .. } => c(left) + c(right),
            }
        }
        c(&self.root)
    }
}
