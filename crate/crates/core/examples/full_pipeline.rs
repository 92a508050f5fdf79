//! Every stage in order, with on-disk artifacts, from a configuration built in code.
//!
//! `cargo run --release --example full_pipeline -- [output_dir]`

use lingseq::corpus::CohortSpec;
use lingseq::pipeline::{run_stage, PipelineConfig, Stage};

fn main() -> lingseq::Result<()> {
    let mut config = PipelineConfig::default();
    config.seed = Some(5);
    config.paths.output = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/full_pipeline".into())
        .into();
    config.synth = CohortSpec {
        n_per_label: [12, 12, 12],
        n_background: 120,
        span_days: [80, 140],
        ..Default::default()
    };
    config.cluster.restarts = 3;
    config.train.cv.folds = 5;
    config.train.influence_repeats = 2;
    config.report.features = vec!["textmind_ppron".into(), "textmind_body".into()];

    for stage in Stage::ALL {
        let s = run_stage(stage, &config)?;
        println!(
            "{:<10} {} ({} files)",
            stage.name(),
            s.message,
            s.written.len()
        );
    }
    let stats = std::fs::read_to_string(config.paths.output.join("stats_gbm.txt"))
        .map_err(|e| lingseq::Error::io("reading stats", e))?;
    println!("\n{stats}");
    Ok(())
}
