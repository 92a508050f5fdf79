//! Statistics blocks for two 3×3 confusion matrices from a nine-user test split.
//!
//! `cargo run --example reference_statistics`

use lingseq::metrics::{render, stats, ConfusionMatrix};

fn main() -> lingseq::Result<()> {
    // Rows are predictions, columns the reference classes 0, 1, 2.
    let tables = [
        ("decision tree", [[2, 0, 1], [0, 3, 1], [1, 0, 1]]),
        ("boosted trees", [[2, 1, 0], [0, 3, 0], [1, 0, 2]]),
    ];
    for (name, counts) in tables {
        let m = ConfusionMatrix::new(counts)?;
        let s = stats(&m, 0.05)?;
        println!("== {name} ==");
        print!("{}", render(&m, &s, 0.05));
        println!();
    }

    // The same block read back from its own text.
    let m = ConfusionMatrix::new(tables[0].1)?;
    let text = render(&m, &stats(&m, 0.05)?, 0.05);
    assert_eq!(ConfusionMatrix::parse(&text)?, m);
    Ok(())
}
