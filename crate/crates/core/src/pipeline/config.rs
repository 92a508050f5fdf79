use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PeriodConfig;
use crate::classify::TrainConfig;
use crate::clustering::ClusterConfig;
use crate::corpus::{CohortSpec, FilterCriteria};
use crate::error::{Error, Result};
use crate::intensity::KernelConfig;
use crate::lexicon::{CategoryDictionary, FeatureSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory receiving every artifact.
    pub output: PathBuf,
    /// Post archive JSONL; when absent, `ingest` reads the `synth` output.
    pub corpus: Option<PathBuf>,
    /// Category dictionary TSV; the bundled demo dictionary when absent.
    pub dictionary: Option<PathBuf>,
    /// Feature schema TOML; the built-in 102-feature schema when absent.
    pub schema: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            output: PathBuf::from("out"),
            corpus: None,
            dictionary: None,
            schema: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Two-sided level of the accuracy interval.
    pub alpha: f64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Features whose center tables are written; every clustered feature when empty.
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; required by `synth`, `cluster` and `train`.
    pub seed: Option<u64>,
    pub paths: PathsConfig,
    pub synth: CohortSpec,
    pub filter: FilterCriteria,
    pub periods: PeriodConfig,
    pub smoothing: KernelConfig,
    pub cluster: ClusterConfig,
    pub train: TrainConfig,
    pub evaluate: EvaluateConfig,
    pub report: ReportConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = e
                .span()
                .map(|s| {
                    let line = text[..s.start].lines().count().max(1);
                    format!("line {line}")
                })
                .unwrap_or_else(|| "config".into());
            Error::config(field, msg)
        })
    }

    /// Parse a TOML file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("--config", format!("cannot read {}: {e}", path.display()))
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.paths.output);
        for p in [
            &mut cfg.paths.corpus,
            &mut cfg.paths.dictionary,
            &mut cfg.paths.schema,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, p) in [
            ("paths.corpus", &self.paths.corpus),
            ("paths.dictionary", &self.paths.dictionary),
            ("paths.schema", &self.paths.schema),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(Error::config(
                        field,
                        format!("{} does not exist", p.display()),
                    ));
                }
            }
        }
        if !(self.evaluate.alpha > 0.0 && self.evaluate.alpha < 1.0) {
            return Err(Error::config("evaluate.alpha", "must lie in (0, 1)"));
        }
        self.periods.validate()?;
        self.smoothing.validate()?;
        self.cluster.validate()?;
        self.train.validate()
    }

    pub fn require_seed(&self, stage: &str) -> Result<u64> {
        self.seed.ok_or_else(|| {
            Error::config(
                "seed",
                format!("stage `{stage}` needs a seed (config or --seed)"),
            )
        })
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        match &self.paths.schema {
            Some(p) => FeatureSchema::load(p),
            None => Ok(FeatureSchema::default_schema()),
        }
    }

    pub fn dictionary(&self, schema: &FeatureSchema) -> Result<CategoryDictionary> {
        match &self.paths.dictionary {
            Some(p) => CategoryDictionary::load(p, schema),
            None => Ok(CategoryDictionary::demo(schema)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(
            PipelineConfig::from_toml("").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn unknown_key_is_config_error() {
        let e = PipelineConfig::from_toml("[cluster]\nk_maxx = 3\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("k_maxx"));
    }

    #[test]
    fn nested_sections_parse() {
        let c = PipelineConfig::from_toml(
            "seed = 7\n[cluster]\nk_max = 4\n[train.cart]\ncp = 0.0\n[periods]\nmode = \"per_user\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.cluster.k_max, 4);
        assert_eq!(c.train.cart.cp, 0.0);
        assert_eq!(c.periods.mode, super::super::PeriodMode::PerUser);
    }

    #[test]
    fn bad_values_name_their_field() {
        let mut c = PipelineConfig::default();
        c.evaluate.alpha = 2.0;
        match c.validate().unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "evaluate.alpha"),
            e => panic!("{e}"),
        }
        let mut c = PipelineConfig::default();
        c.paths.corpus = Some("/nonexistent/posts.jsonl".into());
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn missing_seed_is_config_error() {
        assert_eq!(
            PipelineConfig::default()
                .require_seed("cluster")
                .unwrap_err()
                .exit_code(),
            2
        );
    }
}
