//! Tree and boosted classifiers on a nominal table with two informative columns.
//!
//! `cargo run --release --example train_classifiers`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lingseq::classify::{evaluate, train, tree_to_dot, Dataset, TrainConfig};
use lingseq::metrics::{render, stats};

fn main() -> lingseq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = 30;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..90 {
        let y = i % 3;
        let mut row: Vec<usize> = (0..p).map(|_| rng.random_range(1..=4)).collect();
        // Column 3 mostly tracks the label, column 7 separates class 2 from the rest.
        row[3] = if rng.random::<f64>() < 0.8 {
            y + 1
        } else {
            rng.random_range(1..=3)
        };
        row[7] = if y == 2 { 1 } else { rng.random_range(2..=4) };
        rows.push(row);
        labels.push(y);
    }
    let names = (0..p).map(|j| format!("f{j:02}")).collect();
    let data = Dataset::new(names, vec![4; p], &rows, labels)?;

    let config = TrainConfig::default();
    let outcome = train(&data, &config, 11)?;
    println!("selected features: {}", outcome.selected.join(", "));
    if let Some(rfe) = &outcome.rfe {
        for (size, acc) in &rfe.accuracy_by_size {
            println!("  {size:>2} features: cv accuracy {acc:.3}");
        }
    }
    let best = &outcome.gbm.params;
    println!(
        "boosting: {} trees, depth {}, shrinkage {}",
        best.n_trees, best.interaction_depth, best.shrinkage
    );

    let (cart, gbm) = evaluate(&outcome, &data)?;
    println!(
        "\n-- tree --\n{}",
        render(&cart, &stats(&cart, 0.05)?, 0.05)
    );
    println!("-- boosted --\n{}", render(&gbm, &stats(&gbm, 0.05)?, 0.05));
    for e in outcome.influence.entries.iter().take(5) {
        println!("{:>5} {:6.2}%", e.feature, e.percent);
    }
    println!("\n{}", tree_to_dot(&outcome.cart));
    Ok(())
}
