//! Synthetic cohorts with planted periodic linguistic signals.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{PostRecord, RiskLabel, UserArchive};
use crate::error::{Error, Result};
use crate::lexicon::{
    Aggregation, CategoryDictionary, DailySeriesSet, FeatureKind, FeatureSchema, StructuralMeasure,
};
use crate::seed::rng_for;

/// Filler word outside the demo dictionary; tokenizes as a single-character word.
const FILLER: &str = "嗷";

/// Per-word event rate `base + amplitude * sin(2π day / period + phase)`, floored at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub base: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub phase: f64,
}

fn default_period() -> f64 {
    30.0
}

impl SignalSpec {
    pub fn rate(&self, day: usize) -> f64 {
        let arg = 2.0 * PI * day as f64 / self.period + self.phase;
        (self.base + self.amplitude * arg.sin()).max(0.0)
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(self.base >= 0.0 && self.amplitude >= 0.0) {
            return Err(Error::config(
                field,
                "base and amplitude must be nonnegative",
            ));
        }
        if !(self.period >= 12.0) || !self.phase.is_finite() {
            return Err(Error::config(field, "period must be at least 12 days"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExposureModel {
    /// Mean words on a day the user posts.
    pub mean_words_per_day: f64,
    /// Probability that a given day has any posts.
    pub active_day_probability: f64,
}

impl Default for ExposureModel {
    fn default() -> Self {
        Self {
            mean_words_per_day: 40.0,
            active_day_probability: 0.7,
        }
    }
}

/// A feature whose signal differs by risk group (indexed by label 0, 1, 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedFeature {
    pub feature: String,
    pub groups: [SignalSpec; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_per_label: [usize; 3],
    pub n_background: usize,
    /// Weights of the three group profiles among background users.
    pub background_mix: [f64; 3],
    /// Inclusive range of observation spans, drawn uniformly per user.
    pub span_days: [u32; 2],
    pub start_date: NaiveDate,
    pub exposure: ExposureModel,
    /// Signal of every feature not listed in `planted`, identical across groups.
    pub baseline: SignalSpec,
    pub planted: Vec<PlantedFeature>,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_per_label: [30, 30, 30],
            n_background: 600,
            background_mix: [1.0, 1.0, 1.0],
            span_days: [120, 240],
            start_date: NaiveDate::from_ymd_opt(2014, 1, 1).unwrap(),
            exposure: ExposureModel::default(),
            baseline: SignalSpec {
                base: 0.02,
                amplitude: 0.01,
                period: 30.0,
                phase: 0.0,
            },
            planted: default_planted(),
            seed: 2016,
        }
    }
}

fn sig(base: f64, amplitude: f64, period: f64, phase: f64) -> SignalSpec {
    SignalSpec {
        base,
        amplitude,
        period,
        phase,
    }
}

/// Group-distinct signals on the four features singled out for the completed-suicide group.
pub fn default_planted() -> Vec<PlantedFeature> {
    vec![
        PlantedFeature {
            feature: "punctuation_parenth".into(),
            groups: [
                sig(0.012, 0.010, 24.0, 0.0),
                sig(0.025, 0.020, 42.0, 1.0),
                sig(0.050, 0.040, 60.0, 2.0),
            ],
        },
        PlantedFeature {
            feature: "textmind_auxverb".into(),
            groups: [
                sig(0.050, 0.040, 30.0, 0.0),
                sig(0.025, 0.020, 48.0, 1.5),
                sig(0.012, 0.010, 72.0, 3.0),
            ],
        },
        PlantedFeature {
            feature: "textmind_ppron".into(),
            groups: [
                sig(0.050, 0.040, 36.0, 0.5),
                sig(0.012, 0.010, 36.0, 2.5),
                sig(0.025, 0.020, 36.0, 4.5),
            ],
        },
        PlantedFeature {
            feature: "textmind_body".into(),
            groups: [
                sig(0.025, 0.020, 20.0, 1.0),
                sig(0.012, 0.010, 60.0, 0.0),
                sig(0.050, 0.040, 40.0, 2.0),
            ],
        },
    ]
}

struct Resolved {
    /// Per schema row, signal per group.
    signals: Vec<[SignalSpec; 3]>,
}

impl CohortSpec {
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        let [lo, hi] = self.span_days;
        if lo < 1 || lo > hi {
            return Err(Error::config("synth.span_days", "need 1 <= min <= max"));
        }
        if self.background_mix.iter().any(|w| !(*w >= 0.0))
            || self.background_mix.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::config(
                "synth.background_mix",
                "weights must be nonnegative with a positive sum",
            ));
        }
        let e = &self.exposure;
        if !(e.mean_words_per_day >= 0.0 && e.mean_words_per_day.is_finite()) {
            return Err(Error::config(
                "synth.exposure.mean_words_per_day",
                "must be a nonnegative number",
            ));
        }
        if !(0.0..=1.0).contains(&e.active_day_probability) {
            return Err(Error::config(
                "synth.exposure.active_day_probability",
                "must lie in [0, 1]",
            ));
        }
        self.baseline.validate("synth.baseline")?;
        for (i, p) in self.planted.iter().enumerate() {
            if schema.index_of(&p.feature).is_none() {
                return Err(Error::config(
                    format!("synth.planted[{i}].feature"),
                    format!("unknown feature `{}`", p.feature),
                ));
            }
            for (g, s) in p.groups.iter().enumerate() {
                s.validate(&format!("synth.planted[{i}].groups[{g}]"))?;
            }
        }
        Ok(())
    }

    fn resolve(&self, schema: &FeatureSchema) -> Result<Resolved> {
        self.validate(schema)?;
        let mut signals = vec![[self.baseline; 3]; schema.len()];
        for p in &self.planted {
            signals[schema.index_of(&p.feature).unwrap()] = p.groups;
        }
        Ok(Resolved { signals })
    }

    /// (user id, label, profile group) for every synthetic user, labeled users first.
    fn roster(&self) -> Vec<(String, Option<RiskLabel>, u64)> {
        let mut out = Vec::new();
        for label in RiskLabel::ALL {
            for i in 0..self.n_per_label[label.index()] {
                out.push((
                    format!("l{}_{:04}", label.index(), i),
                    Some(label),
                    out.len() as u64,
                ));
            }
        }
        for i in 0..self.n_background {
            out.push((format!("bg_{i:05}"), None, out.len() as u64));
        }
        out
    }

    fn pick_group(&self, label: Option<RiskLabel>, rng: &mut ChaCha8Rng) -> usize {
        if let Some(l) = label {
            return l.index();
        }
        let total: f64 = self.background_mix.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (g, w) in self.background_mix.iter().enumerate() {
            if u < *w {
                return g;
            }
            u -= w;
        }
        2
    }
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(0.0)
}

/// Words posted per day; inactive days get 0.
fn draw_exposure(spec: &CohortSpec, days: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..days)
        .map(|_| {
            if rng.random::<f64>() < spec.exposure.active_day_probability {
                poisson(rng, spec.exposure.mean_words_per_day)
            } else {
                0.0
            }
        })
        .collect()
}

/// Series mode: daily feature matrices generated directly, bypassing tokenization.
///
/// Count features receive Poisson(words × rate) events per day; ratio features
/// carry that count divided by the day's words; the word-count measure carries
/// the words themselves.
pub fn synthesize_series(spec: &CohortSpec, schema: &FeatureSchema) -> Result<Vec<DailySeriesSet>> {
    synthesize_series_map(spec, schema, Ok)
}

/// [`synthesize_series`] with `f` applied to each user's series as it is
/// generated, so the full daily matrices never coexist in memory.
pub fn synthesize_series_map<T, F>(
    spec: &CohortSpec,
    schema: &FeatureSchema,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(DailySeriesSet) -> Result<T> + Sync,
{
    let resolved = spec.resolve(schema)?;
    let roster = spec.roster();
    roster
        .par_iter()
        .map(|(user_id, label, unit)| {
            let mut rng = rng_for(spec.seed, "synth", *unit);
            let group = spec.pick_group(*label, &mut rng);
            let days = rng.random_range(spec.span_days[0]..=spec.span_days[1]) as usize;
            let words = draw_exposure(spec, days, &mut rng);
            // Most rows share the baseline signal; evaluate each distinct one once.
            let mut rates: Vec<(SignalSpec, Vec<f64>)> = Vec::new();
            let values = schema
                .features()
                .iter()
                .enumerate()
                .map(|(row, def)| {
                    if def.measure == Some(StructuralMeasure::WordCount) {
                        return words.clone();
                    }
                    let signal = resolved.signals[row][group];
                    let r = match rates.iter().position(|(s, _)| *s == signal) {
                        Some(i) => i,
                        None => {
                            rates.push((signal, (0..days).map(|d| signal.rate(d)).collect()));
                            rates.len() - 1
                        }
                    };
                    let rate = &rates[r].1;
                    (0..days)
                        .map(|d| {
                            let count = poisson(&mut rng, words[d] * rate[d]);
                            match def.aggregation {
                                Aggregation::Sum => count,
                                Aggregation::Ratio if words[d] > 0.0 => count / words[d],
                                Aggregation::Ratio => 0.0,
                            }
                        })
                        .collect()
                })
                .collect();
            f(DailySeriesSet {
                user_id: user_id.clone(),
                label: *label,
                start: spec.start_date,
                values,
                word_exposure: words,
            })
        })
        .collect()
}

/// Token mode: post archives whose text carries the planted signals, for the full
/// ingest → extract path. Structural features emerge from the generated text,
/// so only category and punctuation features may be planted.
pub fn synthesize_cohort(
    spec: &CohortSpec,
    schema: &FeatureSchema,
    dictionary: &CategoryDictionary,
) -> Result<BTreeMap<String, UserArchive>> {
    let resolved = spec.resolve(schema)?;
    for (i, p) in spec.planted.iter().enumerate() {
        let row = schema.index_of(&p.feature).unwrap();
        if schema.get(row).kind == FeatureKind::Structural {
            return Err(Error::config(
                format!("synth.planted[{i}].feature"),
                "structural features cannot be planted in token mode",
            ));
        }
    }

    // Surface form emitted for one event of each count feature.
    let mut emit: Vec<Option<String>> = vec![None; schema.len()];
    for (row, def) in schema.features().iter().enumerate() {
        emit[row] = match def.kind {
            FeatureKind::Category => Some(
                dictionary
                    .marker_term(row)
                    .ok_or_else(|| {
                        Error::config(
                            "dictionary",
                            format!("no single-category term for `{}`", def.id),
                        )
                    })?
                    .to_string(),
            ),
            FeatureKind::Punctuation if def.catch_all => Some("#".into()),
            FeatureKind::Punctuation => def
                .chars
                .as_deref()
                .and_then(|c| c.chars().next())
                .map(String::from),
            FeatureKind::Structural => None,
        };
    }

    let roster = spec.roster();
    let archives: Vec<UserArchive> = roster
        .par_iter()
        .map(|(user_id, label, unit)| {
            let mut rng = rng_for(spec.seed, "synth", *unit);
            let group = spec.pick_group(*label, &mut rng);
            let days = rng.random_range(spec.span_days[0]..=spec.span_days[1]) as usize;
            let words = draw_exposure(spec, days, &mut rng);
            let mut posts = Vec::new();
            for d in 0..days {
                let date = spec.start_date + Duration::days(d as i64);
                let is_last = d + 1 == days;
                if words[d] == 0.0 && !(d == 0 || is_last) {
                    continue;
                }
                let mut tokens: Vec<&str> = Vec::new();
                let mut term_words = 0.0;
                for (row, form) in emit.iter().enumerate() {
                    let Some(form) = form else { continue };
                    let n = poisson(&mut rng, words[d] * resolved.signals[row][group].rate(d));
                    if schema.get(row).kind == FeatureKind::Category {
                        term_words += n;
                    }
                    tokens.extend(std::iter::repeat_n(form.as_str(), n as usize));
                }
                let filler = (words[d] - term_words).max(0.0) as usize;
                tokens.extend(std::iter::repeat_n(FILLER, filler));
                tokens.shuffle(&mut rng);

                // First and last days always carry a post so the span is as drawn.
                let n_posts = if tokens.is_empty() {
                    1
                } else {
                    rng.random_range(1..=3usize)
                };
                let per_post = tokens.len().div_ceil(n_posts).max(1);
                let mut chunks: Vec<String> =
                    tokens.chunks(per_post).map(|c| c.join(" ")).collect();
                if chunks.is_empty() {
                    chunks.push(String::new());
                }
                for (k, text) in chunks.into_iter().enumerate() {
                    let ts = date.and_hms_opt(8 + k as u32, 0, 0).unwrap().and_utc();
                    posts.push(PostRecord {
                        user_id: user_id.clone(),
                        timestamp: ts,
                        text,
                    });
                }
            }
            UserArchive {
                user_id: user_id.clone(),
                label: *label,
                posts,
            }
        })
        .collect();
    Ok(archives
        .into_iter()
        .map(|a| (a.user_id.clone(), a))
        .collect())
}
