use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexicon::schema::{FeatureKind, FeatureSchema};

const DEMO_DICTIONARY: &str = include_str!("../../data/demo_dictionary.tsv");

/// Term → category rows lookup, parsed from `term<TAB>id,id,...` lines.
#[derive(Debug, Clone)]
pub struct CategoryDictionary {
    terms: HashMap<String, Vec<usize>>,
    /// Terms in file order, for deterministic iteration.
    order: Vec<String>,
    max_term_chars: usize,
}

impl CategoryDictionary {
    /// The small illustrative dictionary bundled with the crate.
    pub fn demo(schema: &FeatureSchema) -> Self {
        Self::parse(DEMO_DICTIONARY, schema).expect("bundled dictionary is valid")
    }

    pub fn load(path: &Path, schema: &FeatureSchema) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading dictionary {}", path.display()), e))?;
        Self::parse(&text, schema)
    }

    pub fn parse(text: &str, schema: &FeatureSchema) -> Result<Self> {
        let mut dict = Self {
            terms: HashMap::new(),
            order: Vec::new(),
            max_term_chars: 0,
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let field = format!("dictionary line {}", lineno + 1);
            let (term, ids) = line
                .split_once('\t')
                .ok_or_else(|| Error::config(&field, "expected `term<TAB>ids`"))?;
            let ids: Vec<&str> = ids
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            dict.insert(term, &ids, schema).map_err(|e| match e {
                Error::Config { message, .. } => Error::config(field, message),
                other => other,
            })?;
        }
        Ok(dict)
    }

    pub fn insert(&mut self, term: &str, ids: &[&str], schema: &FeatureSchema) -> Result<()> {
        if term.is_empty() {
            return Err(Error::config("dictionary", "empty term"));
        }
        let mut rows = Vec::with_capacity(ids.len());
        for id in ids {
            let row = schema
                .index_of(id)
                .ok_or_else(|| Error::config("dictionary", format!("unknown feature id `{id}`")))?;
            if schema.get(row).kind != FeatureKind::Category {
                return Err(Error::config(
                    "dictionary",
                    format!("`{id}` is not a category feature"),
                ));
            }
            if !rows.contains(&row) {
                rows.push(row);
            }
        }
        if rows.is_empty() {
            return Err(Error::config(
                "dictionary",
                format!("term `{term}` has no categories"),
            ));
        }
        let key = term.to_lowercase();
        self.max_term_chars = self.max_term_chars.max(key.chars().count());
        if self.terms.insert(key.clone(), rows).is_none() {
            self.order.push(key);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn categories(&self, term: &str) -> Option<&[usize]> {
        self.terms.get(term).map(Vec::as_slice)
    }

    pub fn max_term_chars(&self) -> usize {
        self.max_term_chars
    }

    /// First term (in file order) mapping to exactly one category, that category.
    pub fn marker_term(&self, row: usize) -> Option<&str> {
        self.order
            .iter()
            .find(|t| self.terms[t.as_str()] == [row])
            .map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_covers_every_category_with_a_marker() {
        let schema = FeatureSchema::default_schema();
        let dict = CategoryDictionary::demo(&schema);
        for (row, f) in schema.features().iter().enumerate() {
            if f.kind == FeatureKind::Category {
                assert!(dict.marker_term(row).is_some(), "{}", f.id);
            }
        }
    }

    #[test]
    fn unknown_feature_is_config_error() {
        let schema = FeatureSchema::default_schema();
        let err = CategoryDictionary::parse("好\ttextmind_nope\n", &schema).unwrap_err();
        match err {
            Error::Config { field, message } => {
                assert_eq!(field, "dictionary line 1");
                assert!(message.contains("textmind_nope"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn punctuation_id_is_not_a_category() {
        let schema = FeatureSchema::default_schema();
        assert!(CategoryDictionary::parse("好\tpunctuation_comma\n", &schema).is_err());
    }

    #[test]
    fn comments_and_multi_category_lines() {
        let schema = FeatureSchema::default_schema();
        let dict =
            CategoryDictionary::parse("# comment\n\n我\ttextmind_i, textmind_ppron\n", &schema)
                .unwrap();
        let rows = dict.categories("我").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(dict.max_term_chars(), 1);
    }
}
