use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_SCHEMA: &str = include_str!("../../data/schema.toml");

pub const CATEGORY_COUNT: usize = 80;
pub const PUNCTUATION_COUNT: usize = 11;
pub const STRUCTURAL_COUNT: usize = 11;
pub const FEATURE_COUNT: usize = CATEGORY_COUNT + PUNCTUATION_COUNT + STRUCTURAL_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Category,
    Punctuation,
    Structural,
}

/// How daily values combine when several days fall in one resampling bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Sum,
    Ratio,
}

/// Per-day measures that are not dictionary or punctuation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralMeasure {
    WordCount,
    WordsPerSentence,
    LatinRate,
    UrlCount,
    NumberCount,
    DictionaryRate,
    PostCount,
    CharCount,
    SentenceCount,
    OtherRate,
    WordsPerPost,
}

impl StructuralMeasure {
    pub fn aggregation(self) -> Aggregation {
        use StructuralMeasure::*;
        match self {
            WordCount | UrlCount | NumberCount | PostCount | CharCount | SentenceCount => {
                Aggregation::Sum
            }
            WordsPerSentence | LatinRate | DictionaryRate | OtherRate | WordsPerPost => {
                Aggregation::Ratio
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub id: String,
    pub kind: FeatureKind,
    pub aggregation: Aggregation,
    /// Characters of a punctuation class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chars: Option<String>,
    /// Punctuation class receiving every punctuation character no other class claims.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub catch_all: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<StructuralMeasure>,
}

#[derive(Debug, Deserialize)]
struct SchemaFile {
    sentence_terminators: String,
    feature: Vec<FeatureDef>,
}

/// Ordered list of the 102 features. The order defines matrix row indices.
#[derive(Debug, Clone)]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
    index: HashMap<String, usize>,
    sentence_terminators: HashSet<char>,
    punctuation: HashMap<char, usize>,
    catch_all: usize,
}

impl FeatureSchema {
    /// The schema shipped with the crate.
    pub fn default_schema() -> Self {
        Self::from_toml(DEFAULT_SCHEMA).expect("bundled schema is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading schema {}", path.display()), e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| Error::config("schema", e.to_string()))?;
        if file.sentence_terminators.is_empty() {
            return Err(Error::config(
                "schema.sentence_terminators",
                "must not be empty",
            ));
        }
        Self::new(file.feature, &file.sentence_terminators)
    }

    pub fn new(features: Vec<FeatureDef>, sentence_terminators: &str) -> Result<Self> {
        let count = |k| features.iter().filter(|f| f.kind == k).count();
        let (c, p, s) = (
            count(FeatureKind::Category),
            count(FeatureKind::Punctuation),
            count(FeatureKind::Structural),
        );
        if (c, p, s) != (CATEGORY_COUNT, PUNCTUATION_COUNT, STRUCTURAL_COUNT) {
            return Err(Error::config(
                "schema.feature",
                format!("expected 80 category + 11 punctuation + 11 structural features, found {c} + {p} + {s}"),
            ));
        }

        let mut index = HashMap::new();
        let mut punctuation = HashMap::new();
        let mut catch_all = None;
        for (i, f) in features.iter().enumerate() {
            let field = format!("schema.feature[{i}]");
            if f.id.is_empty() {
                return Err(Error::config(field, "empty feature id"));
            }
            if index.insert(f.id.clone(), i).is_some() {
                return Err(Error::config(
                    field,
                    format!("duplicate feature id `{}`", f.id),
                ));
            }
            match f.kind {
                FeatureKind::Category => {
                    if f.aggregation != Aggregation::Sum {
                        return Err(Error::config(field, "category features aggregate by sum"));
                    }
                }
                FeatureKind::Punctuation => {
                    if f.aggregation != Aggregation::Sum {
                        return Err(Error::config(
                            field,
                            "punctuation features aggregate by sum",
                        ));
                    }
                    if f.catch_all {
                        if catch_all.replace(i).is_some() {
                            return Err(Error::config(
                                field,
                                "more than one catch-all punctuation class",
                            ));
                        }
                    }
                    for ch in f.chars.as_deref().unwrap_or("").chars() {
                        if let Some(prev) = punctuation.insert(ch, i) {
                            return Err(Error::config(
                                field,
                                format!(
                                    "character {ch:?} already belongs to `{}`",
                                    features[prev].id
                                ),
                            ));
                        }
                    }
                }
                FeatureKind::Structural => {
                    let Some(m) = f.measure else {
                        return Err(Error::config(field, "structural feature without a measure"));
                    };
                    if m.aggregation() != f.aggregation {
                        return Err(Error::config(
                            field,
                            format!("measure {m:?} aggregates as {:?}", m.aggregation()),
                        ));
                    }
                }
            }
        }
        let catch_all = catch_all
            .ok_or_else(|| Error::config("schema.feature", "no catch-all punctuation class"))?;

        Ok(Self {
            features,
            index,
            sentence_terminators: sentence_terminators.chars().collect(),
            punctuation,
            catch_all,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn get(&self, row: usize) -> &FeatureDef {
        &self.features[row]
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn is_sentence_terminator(&self, ch: char) -> bool {
        self.sentence_terminators.contains(&ch)
    }

    /// Row of the punctuation class for `ch`, if `ch` is punctuation at all.
    pub fn punctuation_class(&self, ch: char) -> Option<usize> {
        if let Some(&row) = self.punctuation.get(&ch) {
            return Some(row);
        }
        is_punctuation_char(ch).then_some(self.catch_all)
    }
}

fn is_punctuation_char(ch: char) -> bool {
    ch.is_ascii_punctuation()
        || matches!(ch as u32,
            0x2010..=0x2027 | 0x2030..=0x205E | 0x3001..=0x303F
            | 0xFF01..=0xFF0F | 0xFF1A..=0xFF20 | 0xFF3B..=0xFF40 | 0xFF5B..=0xFF65)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_has_102_unique_features() {
        let schema = FeatureSchema::default_schema();
        assert_eq!(schema.len(), FEATURE_COUNT);
        let ids: HashSet<_> = schema.ids().collect();
        assert_eq!(ids.len(), 102);
        for id in [
            "textmind_ppron",
            "textmind_auxverb",
            "textmind_body",
            "punctuation_parenth",
            "structural_wps",
        ] {
            assert!(schema.index_of(id).is_some(), "{id}");
        }
    }

    #[test]
    fn punctuation_classes_and_catch_all() {
        let schema = FeatureSchema::default_schema();
        let parenth = schema.index_of("punctuation_parenth").unwrap();
        let otherp = schema.index_of("punctuation_otherp").unwrap();
        assert_eq!(schema.punctuation_class('('), Some(parenth));
        assert_eq!(schema.punctuation_class('（'), Some(parenth));
        assert_eq!(schema.punctuation_class('#'), Some(otherp));
        assert_eq!(schema.punctuation_class('a'), None);
        assert_eq!(schema.punctuation_class('好'), None);
    }

    #[test]
    fn rejects_wrong_feature_count() {
        let mut features = FeatureSchema::default_schema().features().to_vec();
        features.pop();
        let err = FeatureSchema::new(features, ".").unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn rejects_duplicate_ids() {
        let mut features = FeatureSchema::default_schema().features().to_vec();
        features[1].id = features[0].id.clone();
        assert!(FeatureSchema::new(features, ".").is_err());
    }

    #[test]
    fn rejects_measure_aggregation_mismatch() {
        let mut features = FeatureSchema::default_schema().features().to_vec();
        let wps = features
            .iter()
            .position(|f| f.id == "structural_wps")
            .unwrap();
        features[wps].aggregation = Aggregation::Sum;
        assert!(FeatureSchema::new(features, ".").is_err());
    }
}
