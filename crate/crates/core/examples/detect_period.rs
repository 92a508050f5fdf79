//! Dominant period of a noisy monthly rhythm, then its last cycle cut into 12 bins.
//!
//! `cargo run --example detect_period`

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use lingseq::lexicon::Aggregation;
use lingseq::periodics::{detect_period, dft, resample_last_period, MIN_PERIOD_DAYS};

fn main() -> lingseq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let days = 360;
    let series: Vec<f64> = (0..days)
        .map(|t| 1.0 + (2.0 * PI * t as f64 / 30.0).sin() + noise.sample(&mut rng))
        .collect();

    let spectrum = dft(&series)?;
    let mut ranked: Vec<(usize, f64)> = spectrum
        .amplitudes
        .iter()
        .copied()
        .enumerate()
        .skip(1)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("strongest components (f, period, amplitude):");
    for (f, a) in ranked.iter().take(4) {
        println!("  {f:>3}  {:>6.1}  {a:.4}", days as f64 / *f as f64);
    }

    let p = detect_period(&spectrum, MIN_PERIOD_DAYS)?;
    println!("period: {} days (f* = {})", p.period_days, p.f_star);

    let exposure = vec![50.0; days];
    let last = resample_last_period(&series, &exposure, p.period_days, Aggregation::Ratio)?;
    println!("bin width {:.2} days", last.bin_width_days);
    let bins: Vec<String> = last.bins.iter().map(|v| format!("{v:.2}")).collect();
    println!("last period: {}", bins.join(" "));
    Ok(())
}
