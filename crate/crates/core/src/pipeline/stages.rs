use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    report, smooth_user, user_sequences, PipelineConfig, UserDescriptors, UserSequences,
    UserSmoothed,
};
use crate::classify::{
    influence_frequency, relative_influence, train, BoostModel, Dataset, RfeResult, SplitPlan,
    TreeModel,
};
use crate::clustering::{build_nominal_matrix, ClusterModel, LabeledNominalMatrix};
use crate::corpus::{
    filter_users, ingest_jsonl, synthesize_cohort, write_jsonl, RiskLabel, UserArchive,
};
use crate::descriptors::{self, DescriptorMatrix};
use crate::error::{Error, Result};
use crate::intensity::IntensitySmoother;
use crate::lexicon::{extract_daily, DailySeriesSet, FeatureSchema};
use crate::metrics::{confusion, render, stats, ConfusionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Synth,
    Ingest,
    Extract,
    Periods,
    Smooth,
    Describe,
    Cluster,
    Assign,
    Train,
    Evaluate,
    Influence,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 12] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Extract,
        Stage::Periods,
        Stage::Smooth,
        Stage::Describe,
        Stage::Cluster,
        Stage::Assign,
        Stage::Train,
        Stage::Evaluate,
        Stage::Influence,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Periods => "periods",
            Stage::Smooth => "smooth",
            Stage::Describe => "describe",
            Stage::Cluster => "cluster",
            Stage::Assign => "assign",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Influence => "influence",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::config("stage", format!("unknown stage `{s}`")))
    }
}

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }
    pub fn archives(&self) -> PathBuf {
        self.root.join("archives.jsonl")
    }
    pub fn ingest_report(&self) -> PathBuf {
        self.root.join("ingest_report.json")
    }
    pub fn daily(&self) -> PathBuf {
        self.root.join("daily.jsonl")
    }
    pub fn sequences(&self) -> PathBuf {
        self.root.join("sequences.jsonl")
    }
    pub fn smoothed(&self) -> PathBuf {
        self.root.join("smoothed.jsonl")
    }
    pub fn descriptors_background(&self) -> PathBuf {
        self.root.join("descriptors_background.csv")
    }
    pub fn descriptors_labeled(&self) -> PathBuf {
        self.root.join("descriptors_labeled.csv")
    }
    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.csv")
    }
    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }
    pub fn model(&self, feature: &str) -> PathBuf {
        self.models().join(format!("{feature}.json"))
    }
    pub fn nominal(&self) -> PathBuf {
        self.root.join("nominal.csv")
    }
    pub fn cart(&self) -> PathBuf {
        self.root.join("cart.json")
    }
    pub fn gbm(&self) -> PathBuf {
        self.root.join("gbm.json")
    }
    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }
    pub fn selection(&self) -> PathBuf {
        self.root.join("selection.json")
    }
    pub fn stats_cart(&self) -> PathBuf {
        self.root.join("stats_cart.txt")
    }
    pub fn stats_gbm(&self) -> PathBuf {
        self.root.join("stats_gbm.txt")
    }
    pub fn influence(&self) -> PathBuf {
        self.root.join("influence.csv")
    }
    pub fn influence_frequency(&self) -> PathBuf {
        self.root.join("influence_frequency.csv")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

#[derive(Debug, Clone)]
pub struct StageSummary {
    pub stage: Stage,
    pub written: Vec<PathBuf>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Selection {
    retained: Vec<String>,
    selected: Vec<String>,
    rfe: Option<RfeResult>,
}

fn open(path: &Path, stage: &'static str) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact {
            stage,
            path: path.to_path_buf(),
        }),
        Err(e) => Err(Error::io(format!("opening {}", path.display()), e)),
    }
}

/// Write through a temporary sibling so a failed stage never leaves a partial artifact.
fn create<T>(
    path: &Path,
    written: &mut Vec<PathBuf>,
    f: impl FnOnce(&mut BufWriter<File>) -> Result<T>,
) -> Result<T> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    let tmp = path.with_extension("partial");
    let io = |e| Error::io(format!("writing {}", path.display()), e);
    let mut w = BufWriter::new(File::create(&tmp).map_err(io)?);
    let out = f(&mut w)?;
    w.flush().map_err(io)?;
    drop(w);
    std::fs::rename(&tmp, path).map_err(io)?;
    written.push(path.to_path_buf());
    Ok(out)
}

fn write_lines<T: Serialize + Sync>(
    path: &Path,
    items: &[T],
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    create(path, written, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item)
                .map_err(|e| Error::json(format!("encoding {}", path.display()), e))?;
            writeln!(w).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
        Ok(())
    })
}

fn read_lines<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path, stage)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{} line {}", path.display(), i + 1), e))?,
        );
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T, written: &mut Vec<PathBuf>) -> Result<()> {
    create(path, written, |w| {
        serde_json::to_writer_pretty(&mut *w, value)
            .map_err(|e| Error::json(format!("encoding {}", path.display()), e))?;
        writeln!(w).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    })
}

fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T> {
    serde_json::from_reader(open(path, stage)?)
        .map_err(|e| Error::json(format!("reading {}", path.display()), e))
}

fn read_archives(path: &Path, stage: &'static str) -> Result<Vec<UserArchive>> {
    Ok(ingest_jsonl(open(path, stage)?)?
        .archives
        .into_values()
        .collect())
}

fn read_labels(path: &Path) -> Result<Vec<RiskLabel>> {
    let mut out = Vec::new();
    for (i, line) in open(path, "describe")?.lines().enumerate().skip(1) {
        let line = line.map_err(|e| Error::io("reading labels", e))?;
        let label = line
            .rsplit(',')
            .next()
            .and_then(|v| v.parse::<usize>().ok())
            .and_then(RiskLabel::from_index)
            .ok_or_else(|| Error::invalid(format!("labels.csv line {}: bad label", i + 1)))?;
        out.push(label);
    }
    Ok(out)
}

/// Cluster models in schema order.
fn read_models(art: &Artifacts, schema: &FeatureSchema) -> Result<Vec<ClusterModel>> {
    let dir = art.models();
    let entries = std::fs::read_dir(&dir).map_err(|_| Error::MissingArtifact {
        stage: "cluster",
        path: dir.clone(),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MissingArtifact {
            stage: "cluster",
            path: dir,
        });
    }
    let mut models = paths
        .iter()
        .map(|p| ClusterModel::read_json(open(p, "cluster")?))
        .collect::<Result<Vec<_>>>()?;
    models.sort_by_key(|m| schema.index_of(&m.feature).unwrap_or(usize::MAX));
    Ok(models)
}

fn nominal_dataset(art: &Artifacts) -> Result<Dataset> {
    Dataset::from_nominal(&LabeledNominalMatrix::read_csv(open(
        &art.nominal(),
        "assign",
    )?)?)
}

/// Columns of `data` in `features` order.
fn aligned(data: &Dataset, features: &[String]) -> Result<Dataset> {
    Ok(data.select_features(&data.feature_indices(features)?))
}

fn accuracy(m: &ConfusionMatrix) -> f64 {
    m.correct() as f64 / m.total() as f64
}

/// Run one stage, reading its inputs from and writing its outputs to `paths.output`.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<StageSummary> {
    config.validate()?;
    let art = Artifacts::new(&config.paths.output);
    std::fs::create_dir_all(&art.root)
        .map_err(|e| Error::io(format!("creating {}", art.root.display()), e))?;
    let schema = config.schema()?;
    let mut written = Vec::new();
    let message = match stage {
        Stage::Synth => {
            let seed = config.require_seed("synth")?;
            let dictionary = config.dictionary(&schema)?;
            let spec = crate::corpus::CohortSpec {
                seed: crate::seed::derive_seed(seed, "synth", 0),
                ..config.synth.clone()
            };
            let archives = synthesize_cohort(&spec, &schema, &dictionary)?;
            create(&art.corpus(), &mut written, |w| {
                write_jsonl(archives.values(), w)
            })?;
            format!("{} users", archives.len())
        }
        Stage::Ingest => {
            let src = config.paths.corpus.clone().unwrap_or_else(|| art.corpus());
            let ingested = ingest_jsonl(open(&src, "synth")?)?;
            let total = ingested.archives.len();
            let kept = filter_users(ingested.archives.into_values(), &config.filter);
            create(&art.archives(), &mut written, |w| write_jsonl(&kept, w))?;
            write_json(&art.ingest_report(), &ingested.report, &mut written)?;
            format!(
                "{} of {total} users kept, {} records rejected",
                kept.len(),
                ingested.report.rejections.len()
            )
        }
        Stage::Extract => {
            let dictionary = config.dictionary(&schema)?;
            let archives = read_archives(&art.archives(), "ingest")?;
            let sets: Vec<DailySeriesSet> = archives
                .par_iter()
                .map(|a| extract_daily(a, &schema, &dictionary))
                .collect::<Result<_>>()?;
            write_lines(&art.daily(), &sets, &mut written)?;
            format!("{} users", sets.len())
        }
        Stage::Periods => {
            let sets: Vec<DailySeriesSet> = read_lines(&art.daily(), "extract")?;
            let seqs: Vec<UserSequences> = sets
                .par_iter()
                .map(|s| user_sequences(s, &schema, &config.periods))
                .collect::<Result<_>>()?;
            write_lines(&art.sequences(), &seqs, &mut written)?;
            format!("{} users", seqs.len())
        }
        Stage::Smooth => {
            let seqs: Vec<UserSequences> = read_lines(&art.sequences(), "periods")?;
            let smoother = IntensitySmoother::new(&config.smoothing)?;
            let out: Vec<UserSmoothed> = seqs
                .par_iter()
                .map(|s| smooth_user(s, &schema, &smoother))
                .collect::<Result<_>>()?;
            write_lines(&art.smoothed(), &out, &mut written)?;
            format!("{} users", out.len())
        }
        Stage::Describe => {
            let smoothed: Vec<UserSmoothed> = read_lines(&art.smoothed(), "smooth")?;
            let users: Vec<UserDescriptors> = smoothed
                .iter()
                .map(UserDescriptors::from_smoothed)
                .collect();
            let (labeled, background): (Vec<_>, Vec<_>) =
                users.into_iter().partition(|u| u.label.is_some());
            let bg = super::descriptor_matrices(&background, &schema)?;
            let lb = super::descriptor_matrices(&labeled, &schema)?;
            create(&art.descriptors_background(), &mut written, |w| {
                descriptors::write_csv(&bg, w)
            })?;
            create(&art.descriptors_labeled(), &mut written, |w| {
                descriptors::write_csv(&lb, w)
            })?;
            create(&art.labels(), &mut written, |w| {
                let io = |e| Error::io("writing labels", e);
                writeln!(w, "user,label").map_err(io)?;
                for u in &labeled {
                    writeln!(w, "{},{}", u.user_id, u.label.unwrap().index()).map_err(io)?;
                }
                Ok(())
            })?;
            format!(
                "{} background, {} labeled users",
                background.len(),
                labeled.len()
            )
        }
        Stage::Cluster => {
            let seed = config.require_seed("cluster")?;
            let bg = descriptors::read_csv(open(&art.descriptors_background(), "describe")?)?;
            if bg.is_empty() {
                return Err(Error::invalid("no background users to cluster"));
            }
            let models = super::fit_all_clusters(&bg, &config.cluster, seed)?;
            for m in &models {
                create(&art.model(&m.feature), &mut written, |w| {
                    m.write_json(&mut *w)?;
                    writeln!(w).map_err(|e| Error::io("writing cluster model", e))
                })?;
            }
            let ks: Vec<usize> = models.iter().map(|m| m.k).collect();
            format!(
                "{} models, k from {} to {}",
                models.len(),
                ks.iter().min().unwrap(),
                ks.iter().max().unwrap()
            )
        }
        Stage::Assign => {
            let models = read_models(&art, &schema)?;
            let labeled: Vec<DescriptorMatrix> =
                descriptors::read_csv(open(&art.descriptors_labeled(), "describe")?)?;
            let labels = read_labels(&art.labels())?;
            let nominal = build_nominal_matrix(&models, &labeled, &labels)?;
            create(&art.nominal(), &mut written, |w| nominal.write_csv(w))?;
            format!(
                "{} users x {} features",
                nominal.n_rows(),
                nominal.n_features()
            )
        }
        Stage::Train => {
            let seed = config.require_seed("train")?;
            let data = nominal_dataset(&art)?;
            let outcome = train(&data, &config.train, seed)?;
            write_json(&art.split(), &outcome.plan, &mut written)?;
            write_json(
                &art.selection(),
                &Selection {
                    retained: outcome.retained.clone(),
                    selected: outcome.selected.clone(),
                    rfe: outcome.rfe.clone(),
                },
                &mut written,
            )?;
            write_json(&art.cart(), &outcome.cart, &mut written)?;
            write_json(&art.gbm(), &outcome.gbm, &mut written)?;
            format!(
                "{} training rows, {} features selected",
                outcome.plan.train.len(),
                outcome.selected.len()
            )
        }
        Stage::Evaluate => {
            let data = nominal_dataset(&art)?;
            let plan: SplitPlan = read_json(&art.split(), "train")?;
            let cart: TreeModel = read_json(&art.cart(), "train")?;
            let gbm: BoostModel = read_json(&art.gbm(), "train")?;
            let test = data.subset_rows(&plan.test);
            let alpha = config.evaluate.alpha;
            let cm_cart = confusion(
                &cart.predict_dataset(&aligned(&test, &cart.features)?)?,
                &test.labels,
            )?;
            let cm_gbm = confusion(
                &gbm.predict_dataset(&aligned(&test, &gbm.features)?)?,
                &test.labels,
            )?;
            for (path, m) in [(art.stats_cart(), &cm_cart), (art.stats_gbm(), &cm_gbm)] {
                let text = render(m, &stats(m, alpha)?, alpha);
                create(&path, &mut written, |w| {
                    w.write_all(text.as_bytes())
                        .map_err(|e| Error::io("writing stats", e))
                })?;
            }
            format!(
                "held-out accuracy: cart {:.4}, gbm {:.4}",
                accuracy(&cm_cart),
                accuracy(&cm_gbm)
            )
        }
        Stage::Influence => {
            let seed = config.require_seed("influence")?;
            let gbm: BoostModel = read_json(&art.gbm(), "train")?;
            let report = relative_influence(&gbm);
            create(&art.influence(), &mut written, |w| report.write_csv(w))?;
            let data = nominal_dataset(&art)?;
            let freq = influence_frequency(&data, &config.train, seed)?;
            create(&art.influence_frequency(), &mut written, |w| {
                let io = |e| Error::io("writing influence frequency", e);
                writeln!(w, "feature,appearances,repeats").map_err(io)?;
                for (f, c) in &freq.counts {
                    writeln!(w, "{f},{c},{}", freq.repeats).map_err(io)?;
                }
                Ok(())
            })?;
            format!(
                "top feature: {}",
                report.top(1).first().copied().unwrap_or("-")
            )
        }
        Stage::Report => {
            let models = read_models(&art, &schema)?;
            let cart: TreeModel = read_json(&art.cart(), "train")?;
            let gbm: BoostModel = read_json(&art.gbm(), "train")?;
            let chosen: Vec<&ClusterModel> = if config.report.features.is_empty() {
                models.iter().collect()
            } else {
                config
                    .report
                    .features
                    .iter()
                    .map(|f| {
                        models.iter().find(|m| &m.feature == f).ok_or_else(|| {
                            Error::config("report.features", format!("no cluster model for `{f}`"))
                        })
                    })
                    .collect::<Result<_>>()?
            };
            written.extend(report::write_report(&art.report(), &chosen, &cart)?);
            create(&art.report().join("influence.csv"), &mut written, |w| {
                relative_influence(&gbm).write_csv(w)
            })?;
            format!("{} center tables", chosen.len())
        }
    };
    Ok(StageSummary {
        stage,
        written,
        message,
    })
}

/// Every stage in order.
pub fn run_all(config: &PipelineConfig) -> Result<Vec<StageSummary>> {
    Stage::ALL
        .into_iter()
        .map(|s| run_stage(s, config))
        .collect()
}
