//! Token-mode synthetic cohort: post archives whose text carries planted rhythms.
//!
//! Writes the archive as JSON Lines, reads it back and applies the inclusion filter.
//!
//! `cargo run --example synth_cohort -- [out.jsonl]`

use std::io::BufReader;

use lingseq::corpus::{
    filter_users, ingest_jsonl, synthesize_cohort, write_jsonl, CohortSpec, FilterCriteria,
};
use lingseq::lexicon::{CategoryDictionary, FeatureSchema};

fn main() -> lingseq::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/synth_cohort.jsonl".into());
    let schema = FeatureSchema::default_schema();
    let dictionary = CategoryDictionary::demo(&schema);
    let spec = CohortSpec {
        n_per_label: [3, 3, 3],
        n_background: 12,
        span_days: [40, 120],
        ..Default::default()
    };
    let archives = synthesize_cohort(&spec, &schema, &dictionary)?;

    let file = std::fs::File::create(&out).map_err(|e| lingseq::Error::io(&out, e))?;
    write_jsonl(archives.values(), file)?;
    let first = archives.values().next().unwrap();
    println!("{} users written to {out}", archives.len());
    println!(
        "sample post from {}: {:.60}",
        first.user_id, first.posts[0].text
    );

    let file = std::fs::File::open(&out).map_err(|e| lingseq::Error::io(&out, e))?;
    let ingested = ingest_jsonl(BufReader::new(file))?;
    let kept = filter_users(ingested.archives.into_values(), &FilterCriteria::default());
    println!(
        "{} users pass the filter (>= 20 posts, span 50..=1800 days)",
        kept.len()
    );
    for a in kept.iter().take(5) {
        println!(
            "  {:<10} label {:?}  {:>4} posts over {:>3} days",
            a.user_id,
            a.label,
            a.posts.len(),
            a.span_days()
        );
    }
    Ok(())
}
