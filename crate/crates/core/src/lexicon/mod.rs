//! Tokenization and per-day linguistic feature extraction.

mod dictionary;
mod extract;
mod schema;
mod tokenize;

pub use dictionary::CategoryDictionary;
pub use extract::{extract_daily, DailySeriesSet};
pub use schema::{
    Aggregation, FeatureDef, FeatureKind, FeatureSchema, StructuralMeasure, CATEGORY_COUNT,
    FEATURE_COUNT, PUNCTUATION_COUNT, STRUCTURAL_COUNT,
};
pub use tokenize::{Token, TokenClass, Tokenizer};
