//! Per-feature k-means over descriptor rows, silhouette model selection and
//! nearest-center encoding of labeled users.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RiskLabel;
use crate::descriptors::{DescriptorMatrix, DescriptorRow};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for, unit_id};

pub const DIM: usize = 6;
pub type Point = [f64; DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    /// Silhouettes are computed on a seeded subsample of at most this many rows.
    pub silhouette_sample: usize,
    pub standardize: bool,
    pub assignment: Distance,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 7,
            restarts: 10,
            max_iterations: 100,
            silhouette_sample: 1000,
            standardize: true,
            assignment: Distance::L1,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(Error::config("cluster.k_min", "need 2 <= k_min <= k_max"));
        }
        if self.restarts == 0 {
            return Err(Error::config("cluster.restarts", "must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config(
                "cluster.max_iterations",
                "must be at least 1",
            ));
        }
        if self.silhouette_sample < 2 {
            return Err(Error::config(
                "cluster.silhouette_sample",
                "must be at least 2",
            ));
        }
        Ok(())
    }
}

/// Per-column z-score parameters. Constant columns map to 0 and drop out of every distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Point,
    pub sd: Point,
    pub constant: [bool; DIM],
}

impl Standardization {
    pub fn fit(points: &[Point], standardize: bool) -> Self {
        let n = points.len() as f64;
        let mut mean = [0.0; DIM];
        let mut sd = [1.0; DIM];
        let mut constant = [false; DIM];
        for c in 0..DIM {
            let m = points.iter().map(|p| p[c]).sum::<f64>() / n;
            let var = points.iter().map(|p| (p[c] - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let s = var.sqrt();
            constant[c] = !(s > 1e-12 * (1.0 + m.abs()));
            if standardize {
                mean[c] = m;
                sd[c] = if constant[c] { 1.0 } else { s };
            }
        }
        Self { mean, sd, constant }
    }

    pub fn apply(&self, p: &Point) -> Point {
        std::array::from_fn(|c| {
            if self.constant[c] {
                0.0
            } else {
                (p[c] - self.mean[c]) / self.sd[c]
            }
        })
    }

    pub fn invert(&self, z: &Point) -> Point {
        std::array::from_fn(|c| self.mean[c] + z[c] * self.sd[c])
    }
}

fn sq_dist(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn l1_dist(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// One Lloyd run. `trace` holds the within-cluster sum of squares after each iteration.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub centers: Vec<Point>,
    pub assignment: Vec<usize>,
    pub wcss: f64,
    pub trace: Vec<f64>,
}

fn plus_plus_seeds(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if r < d {
                        break;
                    }
                    r -= d;
                }
            }
            pick.expect("positive total implies a positive entry")
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i]).collect()
}

fn refill_empty(points: &[Point], centers: &mut [Point], assignment: &mut [usize]) {
    let k = centers.len();
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let a = assignment[i];
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(p, &centers[a]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            counts[assignment[i]] -= 1;
            assignment[i] = j;
            counts[j] = 1;
            centers[j] = points[i];
        }
    }
}

fn update_centers(points: &[Point], centers: &mut [Point], assignment: &[usize]) -> f64 {
    let k = centers.len();
    let mut sums = vec![[0.0; DIM]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for c in 0..DIM {
            sums[a][c] += p[c];
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            centers[j] = std::array::from_fn(|c| sums[j][c] / counts[j] as f64);
        }
    }
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| sq_dist(p, &centers[a]))
        .sum()
}

/// Nearest center, keeping `current` unless another is strictly closer.
fn nearest(p: &Point, centers: &[Point], current: usize) -> usize {
    let mut best = current;
    let mut bd = sq_dist(p, &centers[current]);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < bd {
            best = j;
            bd = d;
        }
    }
    best
}

/// Lloyd's algorithm from k-means++ seeds. Reassignment keeps a point in its
/// current cluster unless another center is strictly closer.
pub fn kmeans(
    points: &[Point],
    k: usize,
    max_iterations: usize,
    rng: &mut ChaCha8Rng,
) -> Result<KMeansRun> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} with {n} points")));
    }
    let mut centers = plus_plus_seeds(points, k, rng);
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centers, 0)).collect();
    refill_empty(points, &mut centers, &mut assignment);
    let mut trace = vec![update_centers(points, &mut centers, &assignment)];
    for _ in 0..max_iterations {
        let mut changed = false;
        for (p, a) in points.iter().zip(assignment.iter_mut()) {
            let best = nearest(p, &centers, *a);
            if best != *a {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        refill_empty(points, &mut centers, &mut assignment);
        trace.push(update_centers(points, &mut centers, &assignment));
    }
    Ok(KMeansRun {
        wcss: *trace.last().unwrap(),
        centers,
        assignment,
        trace,
    })
}

fn pairwise(points: &[Point]) -> Vec<f64> {
    let m = points.len();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = sq_dist(&points[i], &points[j]).sqrt();
            d[i * m + j] = v;
            d[j * m + i] = v;
        }
    }
    d
}

fn silhouette_from_distances(dist: &[f64], labels: &[usize], k: usize) -> Result<f64> {
    let m = labels.len();
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::UndefinedSilhouette(format!(
            "{} non-empty cluster(s) among {m} points",
            sizes.iter().filter(|&&s| s > 0).count()
        )));
    }
    let mut acc = vec![0.0; k];
    let mut total = 0.0;
    for i in 0..m {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let row = &dist[i * m..(i + 1) * m];
        for (d, &l) in row.iter().zip(labels) {
            acc[l] += d;
        }
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = acc[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&j| j != own && sizes[j] > 0)
            .map(|j| acc[j] / sizes[j] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / m as f64)
}

/// Mean silhouette with Euclidean distance. Singletons score 0, as do points with `a = b = 0`.
pub fn silhouette_mean(points: &[Point], assignment: &[usize]) -> Result<f64> {
    if points.len() != assignment.len() {
        return Err(Error::invalid("points and assignment differ in length"));
    }
    if points.len() < 2 {
        return Err(Error::UndefinedSilhouette("fewer than 2 points".into()));
    }
    let k = assignment.iter().max().unwrap() + 1;
    silhouette_from_distances(&pairwise(points), assignment, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub feature: String,
    pub k: usize,
    /// Centers in raw descriptor units; cluster id `j + 1` is `centers[j]`.
    pub centers: Vec<Point>,
    pub standardization: Standardization,
    pub silhouette_by_k: BTreeMap<usize, f64>,
    #[serde(default)]
    pub assignment: Distance,
}

impl ClusterModel {
    /// Nearest center (1-based id) in standardized units; ties go to the smaller id.
    pub fn assign(&self, row: &Point) -> Result<usize> {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite descriptor row for {}",
                self.feature
            )));
        }
        let z = self.standardization.apply(row);
        let dist = |c: &Point| {
            let zc = self.standardization.apply(c);
            match self.assignment {
                Distance::L1 => l1_dist(&z, &zc),
                Distance::L2 => sq_dist(&z, &zc),
            }
        };
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (j, c) in self.centers.iter().enumerate() {
            let d = dist(c);
            if d < bd {
                best = j;
                bd = d;
            }
        }
        Ok(best + 1)
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::json("writing cluster model", e))
    }

    pub fn read_json(input: impl BufRead) -> Result<Self> {
        serde_json::from_reader(input).map_err(|e| Error::json("reading cluster model", e))
    }
}

pub fn assign_nearest(model: &ClusterModel, row: &DescriptorRow) -> Result<usize> {
    model.assign(&row.to_array())
}

/// A fitted model together with the training rows' 1-based cluster ids.
#[derive(Debug, Clone)]
pub struct ClusterFit {
    pub model: ClusterModel,
    pub assignment: Vec<usize>,
    pub wcss_trace: Vec<f64>,
}

pub fn fit_clusters(
    matrix: &DescriptorMatrix,
    config: &ClusterConfig,
    seed: u64,
) -> Result<ClusterFit> {
    config.validate()?;
    let n = matrix.len();
    if n < config.k_max + 1 {
        return Err(Error::invalid(format!(
            "feature {}: {n} rows, need at least {}",
            matrix.feature,
            config.k_max + 1
        )));
    }
    let raw = matrix.values();
    if raw.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "feature {}: non-finite descriptor",
            matrix.feature
        )));
    }
    let std = Standardization::fit(&raw, config.standardize);
    let z: Vec<Point> = raw.iter().map(|p| std.apply(p)).collect();

    let unit = unit_id(&matrix.feature);
    let sample: Vec<usize> = if n > config.silhouette_sample {
        let mut rng = rng_for(seed, "silhouette", unit);
        let mut idx = index::sample(&mut rng, n, config.silhouette_sample).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let dist = pairwise(&sample.iter().map(|&i| z[i]).collect::<Vec<_>>());

    let feature_seed = derive_seed(seed, "cluster", unit);
    let mut silhouette_by_k = BTreeMap::new();
    let mut best: Option<(f64, KMeansRun)> = None;
    for k in config.k_min..=config.k_max {
        let mut rng = rng_for(feature_seed, "k", k as u64);
        let mut run: Option<KMeansRun> = None;
        for _ in 0..config.restarts {
            let r = kmeans(&z, k, config.max_iterations, &mut rng)?;
            if run.as_ref().is_none_or(|b| r.wcss < b.wcss) {
                run = Some(r);
            }
        }
        let run = run.unwrap();
        let labels: Vec<usize> = sample.iter().map(|&i| run.assignment[i]).collect();
        let Ok(s) = silhouette_from_distances(&dist, &labels, k) else {
            continue;
        };
        silhouette_by_k.insert(k, s);
        if best.as_ref().is_none_or(|(bs, _)| s > bs + 1e-12) {
            best = Some((s, run));
        }
    }
    let Some((_, run)) = best else {
        return Err(Error::UndefinedSilhouette(format!(
            "feature {}: no k in {}..={} gives two non-empty clusters",
            matrix.feature, config.k_min, config.k_max
        )));
    };
    let model = ClusterModel {
        feature: matrix.feature.clone(),
        k: run.centers.len(),
        centers: run.centers.iter().map(|c| std.invert(c)).collect(),
        standardization: std,
        silhouette_by_k,
        assignment: config.assignment,
    };
    Ok(ClusterFit {
        model,
        assignment: run.assignment.iter().map(|a| a + 1).collect(),
        wcss_trace: run.trace,
    })
}

pub fn fit_kmeans_auto(
    matrix: &DescriptorMatrix,
    config: &ClusterConfig,
    seed: u64,
) -> Result<ClusterModel> {
    fit_clusters(matrix, config, seed).map(|f| f.model)
}

/// Labeled users × features of nominal cluster ids, plus the label column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledNominalMatrix {
    pub features: Vec<String>,
    /// Number of levels (k) of each feature column.
    pub levels: Vec<usize>,
    pub users: Vec<String>,
    /// `values[row][feature]`, each in `1..=levels[feature]`.
    pub values: Vec<Vec<usize>>,
    pub labels: Vec<RiskLabel>,
}

impl LabeledNominalMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn column(&self, f: usize) -> Vec<usize> {
        self.values.iter().map(|r| r[f]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.len() != self.features.len()
            || self.users.len() != self.values.len()
            || self.labels.len() != self.values.len()
        {
            return Err(Error::invalid("nominal matrix dimensions disagree"));
        }
        for (r, row) in self.values.iter().enumerate() {
            if row.len() != self.features.len() {
                return Err(Error::invalid(format!(
                    "nominal row {r} has {} values",
                    row.len()
                )));
            }
            for (f, &v) in row.iter().enumerate() {
                if v == 0 || v > self.levels[f] {
                    return Err(Error::invalid(format!(
                        "nominal row {r}, {}: level {v} outside 1..={}",
                        self.features[f], self.levels[f]
                    )));
                }
            }
        }
        Ok(())
    }

    /// CSV with header `user,<features...>,label`; a second line `#levels,<k...>,3`
    /// records each column's level count.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let io = |e| Error::io("writing nominal matrix", e);
        writeln!(out, "user,{},label", self.features.join(",")).map_err(io)?;
        let levels: Vec<String> = self.levels.iter().map(|k| k.to_string()).collect();
        writeln!(out, "#levels,{},{}", levels.join(","), RiskLabel::ALL.len()).map_err(io)?;
        for ((u, row), l) in self.users.iter().zip(&self.values).zip(&self.labels) {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{u},{},{}", vals.join(","), l.index()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::invalid(format!("nominal csv: missing {what}")))?
                .map_err(|e| Error::io("reading nominal matrix", e))
        };
        let header = next("header")?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "user" || cols[cols.len() - 1] != "label" {
            return Err(Error::invalid(
                "nominal csv: header must be user,<features>,label",
            ));
        }
        let features: Vec<String> = cols[1..cols.len() - 1]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let parse = |s: &str, line: usize| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::invalid(format!("nominal csv line {line}: bad integer `{s}`")))
        };
        let lv = next("levels line")?;
        let lv: Vec<&str> = lv.split(',').collect();
        if lv.len() != cols.len() || lv[0] != "#levels" {
            return Err(Error::invalid("nominal csv: second line must be #levels"));
        }
        let levels = lv[1..lv.len() - 1]
            .iter()
            .map(|s| parse(s, 2))
            .collect::<Result<Vec<_>>>()?;
        let mut m = Self {
            features,
            levels,
            users: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
        };
        let mut line_no = 2;
        while let Some(line) = lines.next() {
            line_no += 1;
            let line = line.map_err(|e| Error::io("reading nominal matrix", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != cols.len() {
                return Err(Error::invalid(format!(
                    "nominal csv line {line_no}: wrong field count"
                )));
            }
            m.users.push(parts[0].to_string());
            m.values.push(
                parts[1..parts.len() - 1]
                    .iter()
                    .map(|s| parse(s, line_no))
                    .collect::<Result<_>>()?,
            );
            let l = parse(parts[parts.len() - 1], line_no)?;
            m.labels.push(
                RiskLabel::from_index(l).ok_or_else(|| {
                    Error::invalid(format!("nominal csv line {line_no}: label {l}"))
                })?,
            );
        }
        m.validate()?;
        Ok(m)
    }
}

/// Encode each labeled user by nearest center, one column per model, in model order.
pub fn build_nominal_matrix(
    models: &[ClusterModel],
    labeled: &[DescriptorMatrix],
    labels: &[RiskLabel],
) -> Result<LabeledNominalMatrix> {
    let by_feature: BTreeMap<&str, &DescriptorMatrix> =
        labeled.iter().map(|m| (m.feature.as_str(), m)).collect();
    let users = match models.first() {
        Some(m) => by_feature
            .get(m.feature.as_str())
            .map(|d| d.users.clone())
            .ok_or_else(|| Error::invalid(format!("no labeled descriptors for {}", m.feature)))?,
        None => return Err(Error::invalid("no cluster models")),
    };
    if labels.len() != users.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} users",
            labels.len(),
            users.len()
        )));
    }
    let mut values = vec![Vec::with_capacity(models.len()); users.len()];
    for model in models {
        let d = by_feature.get(model.feature.as_str()).ok_or_else(|| {
            Error::invalid(format!("no labeled descriptors for {}", model.feature))
        })?;
        if d.users != users {
            return Err(Error::invalid(format!(
                "user order differs for {}",
                model.feature
            )));
        }
        for (row, out) in d.rows.iter().zip(values.iter_mut()) {
            out.push(assign_nearest(model, row)?);
        }
    }
    Ok(LabeledNominalMatrix {
        features: models.iter().map(|m| m.feature.clone()).collect(),
        levels: models.iter().map(|m| m.k).collect(),
        users,
        values,
        labels: labels.to_vec(),
    })
}
