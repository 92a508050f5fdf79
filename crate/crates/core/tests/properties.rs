use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use lingseq::corpus::{
    filter_users, ingest_jsonl, write_jsonl, FilterCriteria, PostRecord, RiskLabel, UserArchive,
};
use lingseq::intensity::{estimate_intensity, Bandwidth, CountingObservation, KernelConfig};
use lingseq::lexicon::Aggregation;
use lingseq::metrics::{clopper_pearson, stats, ConfusionMatrix};
use lingseq::periodics::{dft, resample_last_period};

fn archive_strategy() -> impl Strategy<Value = UserArchive> {
    (
        "[a-z]{1,6}",
        proptest::option::of(0usize..3),
        proptest::collection::vec((0i64..4000 * 86_400, "[a-z 。，（）!?]{0,20}"), 1..40),
    )
        .prop_map(|(id, label, mut posts)| {
            posts.sort_by_key(|p| p.0);
            UserArchive {
                user_id: id.clone(),
                label: label.and_then(RiskLabel::from_index),
                posts: posts
                    .into_iter()
                    .map(|(secs, text)| PostRecord {
                        user_id: id.clone(),
                        timestamp: Utc.timestamp_opt(1_300_000_000 + secs, 0).unwrap(),
                        text,
                    })
                    .collect(),
            }
        })
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_is_idempotent(archives in proptest::collection::vec(archive_strategy(), 0..12), min_posts in 0usize..30) {
        let criteria = FilterCriteria { min_posts, span_range: [3, 2000], ..Default::default() };
        let once = filter_users(archives, &criteria);
        let twice = filter_users(once.clone(), &criteria);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn jsonl_round_trip(archive in archive_strategy()) {
        let mut buf = Vec::new();
        write_jsonl([&archive], &mut buf).unwrap();
        let back = ingest_jsonl(buf.as_slice()).unwrap();
        prop_assert!(back.report.rejections.is_empty());
        prop_assert_eq!(back.archives.get(&archive.user_id), Some(&archive));
    }

    #[test]
    fn parseval(x in proptest::collection::vec(-100.0f64..100.0, 2..300)) {
        let s = dft(&x).unwrap();
        let n = x.len();
        let a = &s.amplitudes;
        let mut sum = a[0] * a[0];
        for (f, v) in a.iter().enumerate().skip(1) {
            sum += if 2 * f == n { v * v } else { 2.0 * v * v };
        }
        let lhs = n as f64 * sum;
        prop_assert!((lhs - power(&x)).abs() <= 1e-8 * power(&x).max(1.0));
    }

    #[test]
    fn dft_scales_linearly(x in proptest::collection::vec(-10.0f64..10.0, 2..200), c in -5.0f64..5.0) {
        let a = dft(&x).unwrap();
        let b = dft(&x.iter().map(|v| c * v).collect::<Vec<_>>()).unwrap();
        for (p, q) in a.amplitudes.iter().zip(&b.amplitudes) {
            prop_assert!((q - c.abs() * p).abs() <= 1e-9 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn resampling_conserves_mass(
        x in proptest::collection::vec(0.0f64..50.0, 12..200),
        frac in 0.0f64..1.0,
    ) {
        let n = x.len();
        let period = 12 + ((n - 12) as f64 * frac) as usize;
        let r = resample_last_period(&x, &x, period, Aggregation::Sum).unwrap();
        let tail: f64 = x[n - period..].iter().sum();
        prop_assert!((r.bins.iter().sum::<f64>() - tail).abs() <= 1e-9 * tail.max(1.0));
        prop_assert!((r.exposure.iter().sum::<f64>() - tail).abs() <= 1e-9 * tail.max(1.0));
    }

    #[test]
    fn intensity_invariant_to_exposure_scale(
        events in proptest::array::uniform12(0.0f64..30.0),
        exposure in proptest::array::uniform12(0.0f64..60.0),
        scale in 0.01f64..100.0,
        b in 0.15f64..1.0,
        t in 0.0f64..=1.0,
    ) {
        let config = KernelConfig { bandwidth: Bandwidth::Fixed(b), ..Default::default() };
        let a = CountingObservation::new(events, exposure).unwrap();
        let s = CountingObservation::new(events.map(|v| v * scale), exposure.map(|v| v * scale)).unwrap();
        let x = estimate_intensity(&a, &config, t).unwrap();
        let y = estimate_intensity(&s, &config, t).unwrap();
        prop_assert!(x >= 0.0);
        prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn kappa_matches_definition(counts in proptest::array::uniform3(proptest::array::uniform3(0u64..20))) {
        prop_assume!(counts.iter().flatten().sum::<u64>() > 0);
        let m = ConfusionMatrix::new(counts).unwrap();
        let n = m.total() as f64;
        let po = m.correct() as f64 / n;
        let pe: f64 = (0..3).map(|k| m.row_sums()[k] as f64 * m.col_sums()[k] as f64).sum::<f64>() / (n * n);
        let s = stats(&m, 0.05).unwrap();
        prop_assert!((s.accuracy - po).abs() < 1e-12);
        if pe < 1.0 {
            prop_assert!((s.kappa - (po - pe) / (1.0 - pe)).abs() < 1e-9);
        }
        prop_assert!(s.ci_low <= po && po <= s.ci_high);
    }

    #[test]
    fn interval_widens_as_alpha_shrinks(n in 1u64..200, frac in 0.0f64..=1.0, a in 0.001f64..0.5, d in 0.001f64..0.4) {
        let x = (n as f64 * frac).round() as u64;
        let (lo1, hi1) = clopper_pearson(x, n, a + d);
        let (lo2, hi2) = clopper_pearson(x, n, a);
        prop_assert!(lo2 <= lo1 + 1e-12 && hi2 >= hi1 - 1e-12);
        prop_assert!((0.0..=1.0).contains(&lo2) && (0.0..=1.0).contains(&hi2));
    }
}
