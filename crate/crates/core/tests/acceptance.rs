//! Acceptance suite. One PASS/FAIL line per criterion; nonzero exit on any failure.
//!
//! `cargo test --test acceptance` runs all seven; `-- 2 4` runs a subset.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use lingseq::classify::{fit_cart, fit_gbm, relative_influence, BoostParams, CartParams, Dataset};
use lingseq::clustering::{fit_clusters, ClusterConfig};
use lingseq::corpus::CohortSpec;
use lingseq::descriptors::{DescriptorMatrix, DescriptorRow};
use lingseq::intensity::{
    estimate_intensity, Bandwidth, CountingObservation, IntensitySmoother, KernelConfig,
};
use lingseq::lexicon::FeatureSchema;
use lingseq::metrics::{stats, ConfusionMatrix};
use lingseq::periodics::{detect_period, dft};
use lingseq::pipeline::{run_all, run_experiment, ExperimentConfig, PipelineConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn golden_statistics() -> Verdict {
    let cases = [
        (
            [[2, 0, 1], [0, 3, 1], [1, 0, 1]],
            [0.6667, 0.2993, 0.9251, 0.3333, 0.04242, 0.5],
        ),
        (
            [[2, 1, 0], [0, 3, 0], [1, 0, 2]],
            [0.7778, 0.3999, 0.9719, 0.4444, 0.04635, 0.6667],
        ),
    ];
    let mut worst = 0.0f64;
    for (counts, want) in cases {
        let s = match ConfusionMatrix::new(counts).and_then(|m| stats(&m, 0.05)) {
            Ok(s) => s,
            Err(e) => return verdict(false, e.to_string()),
        };
        let got = [s.accuracy, s.ci_low, s.ci_high, s.nir, s.p_value, s.kappa];
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    verdict(worst <= 5e-4, format!("max abs deviation {worst:.2e}"))
}

fn spectral_recovery() -> Verdict {
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut hits = 0;
    for seed in 1..=100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..360)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 30.0).sin() + noise.sample(&mut rng))
            .collect();
        let p = dft(&x).and_then(|s| detect_period(&s, 12)).unwrap();
        if p.period_days.abs_diff(30) <= 1 {
            hits += 1;
        }
    }
    verdict(hits >= 95, format!("{hits}/100 seeds within 30 +/- 1 days"))
}

fn fixed(b: f64) -> KernelConfig {
    KernelConfig {
        bandwidth: Bandwidth::Fixed(b),
        ..Default::default()
    }
}

fn intensity_estimator() -> Verdict {
    let mut notes = Vec::new();

    let zero = CountingObservation::new([0.0; 12], [0.0; 12]).unwrap();
    let mut zero_ok = true;
    for config in [KernelConfig::default(), fixed(0.2), fixed(1.0)] {
        let s = IntensitySmoother::new(&config)
            .unwrap()
            .smooth(&zero)
            .unwrap();
        zero_ok &= s
            .raw_estimate
            .iter()
            .chain(&s.normalized)
            .all(|&v| v == 0.0);
    }
    notes.push(format!(
        "zero exposure {}",
        if zero_ok { "exact" } else { "nonzero" }
    ));

    let mut worst = 0.0f64;
    for (c, y) in [(0.3, 50.0), (2.0, 7.0), (0.01, 1000.0)] {
        let obs = CountingObservation::new([c * y; 12], [y; 12]).unwrap();
        for p in 0..=3 {
            for b in [0.15, 0.25, 0.5, 1.0] {
                let config = KernelConfig {
                    degree: p,
                    ..fixed(b)
                };
                for i in 0..=60 {
                    let t = 0.2 + 0.6 * i as f64 / 60.0;
                    worst = worst.max((estimate_intensity(&obs, &config, t).unwrap() - c).abs());
                }
            }
        }
    }
    let constant_ok = worst <= 1e-3;
    notes.push(format!("constant error {worst:.1e}"));

    let smoother = IntensitySmoother::new(&KernelConfig::default()).unwrap();
    let truth = |t: f64| 2.0 + (2.0 * std::f64::consts::PI * t).sin();
    let grid: Vec<f64> = (0..=12).map(|j| j as f64 / 13.0).collect();
    let mut medians = Vec::new();
    for scale in [10.0, 100.0, 1000.0] {
        let mut ise: Vec<f64> = (1..=50u64)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let events: [f64; 12] = std::array::from_fn(|i| {
                    let mean = scale * bin_mean(truth, i);
                    Poisson::new(mean).unwrap().sample(&mut rng)
                });
                let obs = CountingObservation::new(events, [scale; 12]).unwrap();
                let s = smoother.smooth(&obs).unwrap();
                grid.iter()
                    .zip(&s.raw_estimate)
                    .map(|(&t, &a)| (a - truth(t)).powi(2))
                    .sum::<f64>()
                    / grid.len() as f64
            })
            .collect();
        ise.sort_by(f64::total_cmp);
        medians.push(0.5 * (ise[24] + ise[25]));
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    notes.push(format!(
        "median ISE {}",
        medians
            .iter()
            .map(|m| format!("{m:.4}"))
            .collect::<Vec<_>>()
            .join(" > ")
    ));
    verdict(zero_ok && constant_ok && decreasing, notes.join("; "))
}

fn bin_mean(f: impl Fn(f64) -> f64, bin: usize) -> f64 {
    let n = 200;
    (0..n)
        .map(|j| f((bin as f64 + (j as f64 + 0.5) / n as f64) / 12.0))
        .sum::<f64>()
        / n as f64
}

fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut ra: BTreeMap<usize, f64> = BTreeMap::new();
    let mut rb: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *ra.entry(x).or_default() += 1.0;
        *rb.entry(y).or_default() += 1.0;
    }
    let c2 = |v: f64| v * (v - 1.0) / 2.0;
    let index: f64 = table.values().map(|&v| c2(v)).sum();
    let sa: f64 = ra.values().map(|&v| c2(v)).sum();
    let sb: f64 = rb.values().map(|&v| c2(v)).sum();
    let expected = sa * sb / c2(a.len() as f64);
    let max = 0.5 * (sa + sb);
    (index - expected) / (max - expected)
}

fn clustering() -> Verdict {
    let means = [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [6.0, 0.0, 3.0, 0.0, 6.0, 0.0],
        [0.0, 6.0, 0.0, 6.0, 0.0, 3.0],
    ];
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut hits = 0;
    let mut ks = BTreeMap::new();
    for seed in 1..=100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<usize> = (0..600).map(|i| i % 3).collect();
        let rows = truth
            .iter()
            .map(|&g| {
                DescriptorRow::from_array(std::array::from_fn(|d| {
                    means[g][d] + noise.sample(&mut rng)
                }))
            })
            .collect();
        let m = DescriptorMatrix {
            feature: "blobs".into(),
            users: (0..600).map(|i| format!("u{i}")).collect(),
            rows,
        };
        let fit = fit_clusters(&m, &ClusterConfig::default(), seed).unwrap();
        *ks.entry(fit.model.k).or_insert(0) += 1;
        if fit.model.k == 3 && adjusted_rand_index(&fit.assignment, &truth) >= 0.99 {
            hits += 1;
        }
    }
    verdict(
        hits >= 95,
        format!("{hits}/100 seeds with k = 3 and ARI >= 0.99; chosen k {ks:?}"),
    )
}

fn classifiers() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = 6;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..120 {
        let row: Vec<usize> = (0..p).map(|_| rng.random_range(1..=3)).collect();
        // Deterministic function of the first three columns.
        labels.push((row[0] + 2 * row[1] * row[2]) % 3);
        rows.push(row);
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    let data = Dataset::new(names, vec![3; p], &rows, labels).unwrap();

    let cart = fit_cart(
        &data,
        &CartParams {
            cp: 0.0,
            min_split: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let pred = cart.predict_dataset(&data).unwrap();
    let correct = pred
        .iter()
        .zip(&data.labels)
        .filter(|(a, b)| a == b)
        .count();
    let cart_ok = correct == data.n_rows();

    let params = BoostParams {
        n_trees: 150,
        interaction_depth: 2,
        min_obs_in_node: 5,
        ..Default::default()
    };
    let gbm = fit_gbm(&data, &params).unwrap();
    let total = relative_influence(&gbm).total();
    let influence_ok = (total - 100.0).abs() <= 1e-6;
    let deviance_ok = gbm.train_deviance.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        cart_ok && influence_ok && deviance_ok,
        format!(
            "tree train accuracy {correct}/{}; influence total {total:.9}; deviance non-increasing {deviance_ok}",
            data.n_rows()
        ),
    )
}

fn end_to_end() -> Verdict {
    let schema = FeatureSchema::default_schema();
    let config = ExperimentConfig::default();
    let (mut accurate, mut planted) = (0, 0);
    for seed in 1..=100u64 {
        match run_experiment(&config, &schema, seed) {
            Ok(o) => {
                accurate += usize::from(o.gbm_accuracy >= 0.6);
                planted += usize::from(o.planted_in_top);
            }
            Err(e) => eprintln!("seed {seed}: {e}"),
        }
    }
    verdict(
        accurate >= 80 && planted >= 80,
        format!("accuracy >= 0.60 in {accurate}/100; planted features in top 10 in {planted}/100"),
    )
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn determinism() -> Verdict {
    let base = tempfile::tempdir().unwrap();
    let mut config = PipelineConfig::default();
    config.seed = Some(77);
    config.synth = CohortSpec {
        n_per_label: [12, 12, 12],
        n_background: 100,
        span_days: [80, 140],
        ..Default::default()
    };
    config.cluster.restarts = 3;
    config.train.cv.folds = 4;
    config.train.influence_repeats = 2;
    config.report.features = vec!["textmind_ppron".into()];
    let mut snapshots = Vec::new();
    for run in ["a", "b"] {
        config.paths.output = base.path().join(run);
        if let Err(e) = run_all(&config) {
            return verdict(false, format!("run {run}: {e}"));
        }
        snapshots.push(files(&config.paths.output));
    }
    let differing: Vec<&String> = snapshots[0]
        .iter()
        .filter(|(k, v)| snapshots[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    let same_set = snapshots[0].len() == snapshots[1].len();
    verdict(
        same_set && differing.is_empty(),
        format!(
            "{} artifacts compared, {} differ {:?}",
            snapshots[0].len(),
            differing.len(),
            differing
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (
            "golden statistics",
            golden_statistics,
            Duration::from_secs(1),
        ),
        (
            "spectral recovery",
            spectral_recovery,
            Duration::from_secs(5),
        ),
        (
            "intensity estimator",
            intensity_estimator,
            Duration::from_secs(30),
        ),
        ("clustering", clustering, Duration::from_secs(60)),
        (
            "classifier correctness",
            classifiers,
            Duration::from_secs(60),
        ),
        ("end-to-end cohort", end_to_end, Duration::from_secs(600)),
        ("determinism", determinism, Duration::from_secs(600)),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed <= *limit;
        failed += usize::from(!pass);
        println!(
            "{} {n}. {name}: {} [{:.2}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
