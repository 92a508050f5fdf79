//! Synthetic cohort run end to end in memory, once per seed.
//!
//! `cargo run --release --example cohort_experiment -- [first_seed] [count]`

use std::time::Instant;

use lingseq::lexicon::FeatureSchema;
use lingseq::pipeline::{run_experiment, ExperimentConfig};

fn main() -> lingseq::Result<()> {
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let first = args.first().copied().unwrap_or(1);
    let count = args.get(1).copied().unwrap_or(1);
    let schema = FeatureSchema::default_schema();
    let config = ExperimentConfig::default();
    for seed in first..first + count {
        let t = Instant::now();
        let out = run_experiment(&config, &schema, seed)?;
        println!(
            "seed {seed}: gbm {:.3}  cart {:.3}  planted in top {}: {}  ({:.1}s)",
            out.gbm_accuracy,
            out.cart_accuracy,
            config.top,
            out.planted_in_top,
            t.elapsed().as_secs_f64()
        );
        println!("  top: {}", out.top_features.join(", "));
    }
    Ok(())
}
