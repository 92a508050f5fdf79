use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{RiskLabel, UserArchive};
use crate::error::{Error, Result};
use crate::lexicon::dictionary::CategoryDictionary;
use crate::lexicon::schema::{FeatureKind, FeatureSchema, StructuralMeasure};
use crate::lexicon::tokenize::{TokenClass, Tokenizer};

/// Per-user feature values on every calendar day from first to last post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeriesSet {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<RiskLabel>,
    pub start: NaiveDate,
    /// One row per schema feature, each of length `days()`.
    pub values: Vec<Vec<f64>>,
    /// Words posted per day.
    pub word_exposure: Vec<f64>,
}

impl DailySeriesSet {
    pub fn days(&self) -> usize {
        self.word_exposure.len()
    }

    pub fn row(&self, feature: usize) -> &[f64] {
        &self.values[feature]
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.values.len() != n_features {
            return Err(Error::invalid(format!(
                "user {}: {} feature rows, expected {n_features}",
                self.user_id,
                self.values.len()
            )));
        }
        let days = self.days();
        if days == 0 {
            return Err(Error::invalid(format!(
                "user {}: empty day axis",
                self.user_id
            )));
        }
        for row in &self.values {
            if row.len() != days {
                return Err(Error::invalid(format!(
                    "user {}: ragged rows",
                    self.user_id
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!(
                    "user {}: negative or non-finite value",
                    self.user_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default, Clone)]
struct DayTally {
    words: f64,
    tokens: f64,
    latin: f64,
    urls: f64,
    numbers: f64,
    terms: f64,
    other: f64,
    posts: f64,
    chars: f64,
    sentences: f64,
}

/// Daily feature matrix for one archive.
pub fn extract_daily(
    archive: &UserArchive,
    schema: &FeatureSchema,
    dictionary: &CategoryDictionary,
) -> Result<DailySeriesSet> {
    let start = archive
        .first_date()
        .ok_or_else(|| Error::invalid(format!("user {} has no posts", archive.user_id)))?;
    let days = archive.span_days() as usize;
    let tokenizer = Tokenizer::new(schema, dictionary);

    let mut values = vec![vec![0.0; days]; schema.len()];
    let mut tallies = vec![DayTally::default(); days];

    for post in &archive.posts {
        let day = (post.date() - start).num_days() as usize;
        let tally = &mut tallies[day];
        tally.posts += 1.0;
        tally.chars += post.text.chars().filter(|c| !c.is_whitespace()).count() as f64;
        tally.sentences += sentence_count(&post.text, schema) as f64;

        for token in tokenizer.tokenize(&post.text) {
            tally.tokens += 1.0;
            if token.class.is_word() {
                tally.words += 1.0;
            }
            match token.class {
                TokenClass::Term => tally.terms += 1.0,
                TokenClass::Latin => tally.latin += 1.0,
                TokenClass::Url => tally.urls += 1.0,
                TokenClass::Number => tally.numbers += 1.0,
                TokenClass::Other => tally.other += 1.0,
                TokenClass::Punctuation => {}
            }
            for &row in token.categories {
                values[row][day] += 1.0;
            }
            if let Some(row) = token.punctuation {
                values[row][day] += 1.0;
            }
        }
    }

    for (row, def) in schema.features().iter().enumerate() {
        if def.kind != FeatureKind::Structural {
            continue;
        }
        let measure = def.measure.expect("schema validated");
        for (day, t) in tallies.iter().enumerate() {
            values[row][day] = structural_value(measure, t);
        }
    }

    Ok(DailySeriesSet {
        user_id: archive.user_id.clone(),
        label: archive.label,
        start,
        values,
        word_exposure: tallies.iter().map(|t| t.words).collect(),
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn structural_value(measure: StructuralMeasure, t: &DayTally) -> f64 {
    use StructuralMeasure::*;
    match measure {
        WordCount => t.words,
        WordsPerSentence => ratio(t.words, t.sentences),
        LatinRate => ratio(t.latin, t.tokens),
        UrlCount => t.urls,
        NumberCount => t.numbers,
        DictionaryRate => ratio(t.terms, t.words),
        PostCount => t.posts,
        CharCount => t.chars,
        SentenceCount => t.sentences,
        OtherRate => ratio(t.other, t.tokens),
        WordsPerPost => ratio(t.words, t.posts),
    }
}

/// Runs of sentence terminators; "..." ends one sentence.
fn sentence_count(text: &str, schema: &FeatureSchema) -> usize {
    let mut count = 0;
    let mut in_run = false;
    for ch in text.chars() {
        let term = schema.is_sentence_terminator(ch);
        if term && !in_run {
            count += 1;
        }
        in_run = term;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PostRecord;
    use chrono::{Duration, TimeZone, Utc};

    fn archive(posts: &[(i64, &str)]) -> UserArchive {
        let t0 = Utc.with_ymd_and_hms(2016, 5, 1, 9, 0, 0).unwrap();
        UserArchive {
            user_id: "u".into(),
            label: None,
            posts: posts
                .iter()
                .map(|&(d, text)| PostRecord {
                    user_id: "u".into(),
                    timestamp: t0 + Duration::days(d),
                    text: text.into(),
                })
                .collect(),
        }
    }

    fn extract(a: &UserArchive) -> (DailySeriesSet, FeatureSchema) {
        let schema = FeatureSchema::default_schema();
        let dict = CategoryDictionary::demo(&schema);
        (extract_daily(a, &schema, &dict).unwrap(), schema)
    }

    #[test]
    fn missing_day_is_zero_column() {
        let (set, _) = extract(&archive(&[(0, "我 开心。"), (2, "我 很多 钱!")]));
        assert_eq!(set.days(), 3);
        assert!(set.values.iter().all(|row| row[1] == 0.0));
        assert_eq!(set.word_exposure[1], 0.0);
        assert!(set.word_exposure[0] > 0.0);
    }

    #[test]
    fn same_day_counts_add() {
        let (set, schema) = extract(&archive(&[(0, "头 头 头"), (0, "头 手 心脏 头")]));
        let body = schema.index_of("textmind_body").unwrap();
        assert_eq!(set.values[body][0], 7.0);
    }

    #[test]
    fn words_per_sentence() {
        let (set, schema) = extract(&archive(&[(0, "a b c. d e.")]));
        let wps = schema.index_of("structural_wps").unwrap();
        let wc = schema.index_of("structural_wc").unwrap();
        let sentences = schema.index_of("structural_sentences").unwrap();
        assert_eq!(set.values[wc][0], 5.0);
        assert_eq!(set.values[sentences][0], 2.0);
        assert!((set.values[wps][0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn sentence_less_day_has_zero_wps() {
        let (set, schema) = extract(&archive(&[(0, "a b c")]));
        let wps = schema.index_of("structural_wps").unwrap();
        assert_eq!(set.values[wps][0], 0.0);
    }

    #[test]
    fn empty_post_counts_as_post() {
        let (set, schema) = extract(&archive(&[(0, "")]));
        let posts = schema.index_of("structural_posts").unwrap();
        assert_eq!(set.values[posts][0], 1.0);
        assert_eq!(set.word_exposure[0], 0.0);
    }

    #[test]
    fn latin_rate_and_urls() {
        let (set, schema) = extract(&archive(&[(0, "go home http://x.cn 哈哈 (")]));
        let latin = schema.index_of("structural_latin_rate").unwrap();
        let url = schema.index_of("structural_url").unwrap();
        let parenth = schema.index_of("punctuation_parenth").unwrap();
        // tokens: go, home, url, 哈哈, ( => 2 latin of 5
        assert!((set.values[latin][0] - 0.4).abs() < 1e-12);
        assert_eq!(set.values[url][0], 1.0);
        assert_eq!(set.values[parenth][0], 1.0);
        assert_eq!(set.word_exposure[0], 3.0);
    }

    #[test]
    fn no_posts_is_invalid() {
        let schema = FeatureSchema::default_schema();
        let dict = CategoryDictionary::demo(&schema);
        assert!(extract_daily(&archive(&[]), &schema, &dict).is_err());
    }
}
