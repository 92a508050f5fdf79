//! Local-polynomial intensity estimate for a sparse 12-bin counting sequence.
//!
//! Bins without exposure are unobserved; the estimator fills them from neighbors.
//!
//! `cargo run --example smooth_intensity`

use lingseq::intensity::{Bandwidth, CountingObservation, IntensitySmoother, KernelConfig};

fn row(label: &str, v: &[f64]) {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:6.3}")).collect();
    println!("{label:>11} {}", cells.join(" "));
}

fn main() -> lingseq::Result<()> {
    let events = [3.0, 0.0, 5.0, 0.0, 0.0, 9.0, 11.0, 0.0, 6.0, 2.0, 0.0, 1.0];
    let exposure = [
        60.0, 0.0, 80.0, 40.0, 0.0, 90.0, 100.0, 0.0, 70.0, 50.0, 30.0, 40.0,
    ];
    let obs = CountingObservation::new(events, exposure)?;
    row("rate", &obs.rates());

    let auto = IntensitySmoother::new(&KernelConfig::default())?.smooth(&obs)?;
    println!("selected bandwidth {}", auto.bandwidth);
    row("trimmed", &auto.trimmed);
    row("normalized", &auto.normalized);

    for b in [0.15, 0.5, 1.0] {
        let cfg = KernelConfig {
            bandwidth: Bandwidth::Fixed(b),
            ..Default::default()
        };
        let s = IntensitySmoother::new(&cfg)?.smooth(&obs)?;
        row(&format!("b = {b}"), &s.trimmed);
    }
    Ok(())
}
