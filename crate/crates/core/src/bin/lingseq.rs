use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lingseq::metrics::{render, stats, ConfusionMatrix};
use lingseq::pipeline::{run_stage, PipelineConfig, Stage, StageSummary};
use lingseq::{Error, Result};

/// Temporal linguistic-pattern pipeline, one subcommand per stage.
#[derive(Parser)]
#[command(name = "lingseq", version)]
struct Cli {
    /// Pipeline configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic post archive.
    Synth,
    /// Validate, group and filter post archives.
    Ingest,
    /// Daily feature series per user.
    Extract,
    /// Dominant periods and 12-bin resampled last periods.
    Periods,
    /// Intensity-smoothed sequences.
    Smooth,
    /// Descriptor matrices for background and labeled users.
    Describe,
    /// Per-feature k-means on background users.
    Cluster,
    /// Nominal matrix of labeled users.
    Assign,
    /// Split, select features, fit the tree and the boosted model.
    Train,
    /// Confusion matrices and statistics on the held-out split.
    Evaluate {
        /// Score a confusion-matrix text file instead (rows: prediction, columns: reference).
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Relative influence and its appearance frequency over repeated trainings.
    Influence,
    /// Center tables, tree drawings and the influence table.
    Report,
    /// Every stage in order.
    All,
}

fn print(summary: &StageSummary) {
    println!("{}: {}", summary.stage, summary.message);
    match summary.written.as_slice() {
        [first, _, _, _, _, _, _, _, _, ..] => {
            let dir = first.parent().unwrap_or(first);
            println!("  {} files in {}", summary.written.len(), dir.display());
        }
        files => files.iter().for_each(|p| println!("  {}", p.display())),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    let stages: Vec<Stage> = match cli.command {
        Command::Evaluate { matrix: Some(path) } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            let m = ConfusionMatrix::parse(&text)?;
            let alpha = config.evaluate.alpha;
            print!("{}", render(&m, &stats(&m, alpha)?, alpha));
            return Ok(());
        }
        Command::Synth => vec![Stage::Synth],
        Command::Ingest => vec![Stage::Ingest],
        Command::Extract => vec![Stage::Extract],
        Command::Periods => vec![Stage::Periods],
        Command::Smooth => vec![Stage::Smooth],
        Command::Describe => vec![Stage::Describe],
        Command::Cluster => vec![Stage::Cluster],
        Command::Assign => vec![Stage::Assign],
        Command::Train => vec![Stage::Train],
        Command::Evaluate { matrix: None } => vec![Stage::Evaluate],
        Command::Influence => vec![Stage::Influence],
        Command::Report => vec![Stage::Report],
        Command::All => Stage::ALL.to_vec(),
    };
    for stage in stages {
        print(&run_stage(stage, &config)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
