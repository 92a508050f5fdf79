//! Per-day feature series from a handful of posts.
//!
//! `cargo run --example extract_features`

use chrono::{TimeZone, Utc};

use lingseq::corpus::{PostRecord, UserArchive};
use lingseq::lexicon::{extract_daily, CategoryDictionary, FeatureSchema, Tokenizer};

fn main() -> lingseq::Result<()> {
    let schema = FeatureSchema::default_schema();
    let dictionary = CategoryDictionary::demo(&schema);

    let texts = [
        (0, "我们应该可以的（真的）。明天见！"),
        (0, "头有点疼，心脏也不舒服……"),
        (2, "See https://example.com for 3 photos."),
        (3, "人家不想说话。"),
    ];
    let posts = texts
        .iter()
        .map(|&(day, text)| PostRecord {
            user_id: "demo".into(),
            timestamp: Utc.with_ymd_and_hms(2015, 6, 1 + day, 9, 0, 0).unwrap(),
            text: text.into(),
        })
        .collect();
    let archive = UserArchive {
        user_id: "demo".into(),
        label: None,
        posts,
    };

    let tokenizer = Tokenizer::new(&schema, &dictionary);
    for t in tokenizer.tokenize(texts[0].1) {
        let cats: Vec<&str> = t
            .categories
            .iter()
            .map(|&r| schema.get(r).id.as_str())
            .collect();
        println!("{:>8} {:?} {}", t.text, t.class, cats.join(","));
    }

    let daily = extract_daily(&archive, &schema, &dictionary)?;
    println!("\n{} days from {}", daily.days(), daily.start);
    println!("{:<26} {}", "words", fmt(&daily.word_exposure));
    for id in [
        "textmind_ppron",
        "textmind_auxverb",
        "textmind_body",
        "punctuation_parenth",
        "structural_url",
    ] {
        println!("{id:<26} {}", fmt(daily.row(schema.index_of(id).unwrap())));
    }
    Ok(())
}

fn fmt(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:6.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}
