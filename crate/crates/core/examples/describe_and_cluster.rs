//! Descriptors for a synthetic population, then per-feature k-means with
//! silhouette-selected k and nearest-center codes for the labeled users.
//!
//! `cargo run --release --example describe_and_cluster`

use lingseq::clustering::{build_nominal_matrix, fit_clusters, ClusterConfig};
use lingseq::corpus::{synthesize_series_map, CohortSpec};
use lingseq::intensity::{IntensitySmoother, KernelConfig};
use lingseq::lexicon::FeatureSchema;
use lingseq::pipeline::{descriptor_matrices, process_user, render_center_table, PeriodConfig};

fn main() -> lingseq::Result<()> {
    let schema = FeatureSchema::default_schema();
    let spec = CohortSpec {
        n_per_label: [10, 10, 10],
        n_background: 300,
        ..Default::default()
    };
    let smoother = IntensitySmoother::new(&KernelConfig::default())?;
    let users = synthesize_series_map(&spec, &schema, |set| {
        process_user(&set, &schema, &PeriodConfig::default(), &smoother)
    })?;
    let (labeled, background): (Vec<_>, Vec<_>) =
        users.into_iter().partition(|u| u.label.is_some());

    let feature = schema.index_of("textmind_ppron").unwrap();
    let bg = descriptor_matrices(&background, &schema)?.swap_remove(feature);
    let first = bg.rows[0];
    println!("{} background users; first row {:?}", bg.len(), first);

    let fit = fit_clusters(&bg, &ClusterConfig::default(), 42)?;
    for (k, s) in &fit.model.silhouette_by_k {
        println!("  k = {k}: mean silhouette {s:.4}");
    }
    println!("\n{}", render_center_table(&fit.model));

    let lab = descriptor_matrices(&labeled, &schema)?.swap_remove(feature);
    let labels: Vec<_> = labeled.iter().filter_map(|u| u.label).collect();
    let nominal = build_nominal_matrix(&[fit.model], &[lab], &labels)?;
    let mut table = vec![[0usize; 3]; nominal.levels[0]];
    for (row, l) in nominal.values.iter().zip(&nominal.labels) {
        table[row[0] - 1][l.index()] += 1;
    }
    println!("cluster x label counts:");
    for (j, counts) in table.iter().enumerate() {
        println!("  {}: {:?}", j + 1, counts);
    }
    Ok(())
}
