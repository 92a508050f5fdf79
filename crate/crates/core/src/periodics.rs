//! Dominant-period detection via the DFT and last-period resampling to 12 bins.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::Aggregation;

/// Bins per resampled period.
pub const BINS: usize = 12;

/// Shortest admissible period in days.
pub const MIN_PERIOD_DAYS: usize = 12;

/// One-sided spectrum of a real series, with `1/N` amplitude scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub n: usize,
    /// `|X(f)| / N` for `f` in `0..=N/2`.
    pub amplitudes: Vec<f64>,
    /// `atan2(Im X(f), Re X(f))` for `f` in `0..=N/2`.
    pub phases: Vec<f64>,
}

struct FftState {
    planner: FftPlanner<f64>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

thread_local! {
    static FFT: RefCell<FftState> = RefCell::new(FftState {
        planner: FftPlanner::new(),
        buf: Vec::new(),
        scratch: Vec::new(),
    });
}

fn with_fft<R>(series: &[f64], f: impl FnOnce(&[Complex<f64>]) -> R) -> Result<R> {
    let n = series.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "dft needs at least 2 samples, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("dft input contains non-finite values"));
    }
    Ok(FFT.with(|state| {
        let st = &mut *state.borrow_mut();
        let fft = st.planner.plan_fft_forward(n);
        st.buf.clear();
        st.buf.extend(series.iter().map(|&x| Complex::new(x, 0.0)));
        st.scratch
            .resize(fft.get_inplace_scratch_len(), Complex::default());
        fft.process_with_scratch(&mut st.buf, &mut st.scratch);
        f(&st.buf)
    }))
}

/// Forward DFT `X(f) = Σ_t x(t) e^{-2πi f t / N}` of a real series.
pub fn dft(series: &[f64]) -> Result<Spectrum> {
    let n = series.len();
    let scale = 1.0 / n as f64;
    with_fft(series, |x| Spectrum {
        n,
        amplitudes: x[..=n / 2].iter().map(|c| c.norm() * scale).collect(),
        phases: x[..=n / 2].iter().map(|c| c.im.atan2(c.re)).collect(),
    })
}

/// `detect_period(&dft(series)?, min_period_days)` without computing the
/// phases or amplitudes above the admissible band.
pub fn dominant_period(series: &[f64], min_period_days: usize) -> Result<PeriodEstimate> {
    let n = series.len();
    let top = (n / min_period_days.max(1)).min(n / 2);
    let scale = 1.0 / n as f64;
    let spectrum = with_fft(series, |x| Spectrum {
        n,
        amplitudes: x[..=top].iter().map(|c| c.norm() * scale).collect(),
        phases: Vec::new(),
    })?;
    detect_period(&spectrum, min_period_days)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    /// Dominant frequency index (cycles per series); 0 when the fallback was used.
    pub f_star: usize,
    pub period_days: usize,
    pub fallback_used: bool,
}

/// Period of the strongest non-DC component with period at least `min_period_days`.
///
/// Ties go to the lower frequency. A spectrum with no candidate amplitude above
/// `1e-12` falls back to a period of `min_period_days` (clamped to `N`).
pub fn detect_period(spectrum: &Spectrum, min_period_days: usize) -> Result<PeriodEstimate> {
    let n = spectrum.n;
    if min_period_days == 0 {
        return Err(Error::invalid("minimum period must be positive"));
    }
    if n < min_period_days {
        return Err(Error::invalid(format!(
            "series of {n} days is shorter than the minimum period {min_period_days}"
        )));
    }
    let f_max = (n / min_period_days).min(spectrum.amplitudes.len() - 1);
    let mut best: Option<(usize, f64)> = None;
    for f in 1..=f_max {
        let a = spectrum.amplitudes[f];
        // Amplitudes within rounding of each other count as tied.
        if best.is_none_or(|(_, b)| a > b * (1.0 + 1e-9)) {
            best = Some((f, a));
        }
    }
    match best {
        Some((f, a)) if a >= 1e-12 => {
            let period = (n as f64 / f as f64).round() as usize;
            Ok(PeriodEstimate {
                f_star: f,
                period_days: period.clamp(min_period_days, n),
                fallback_used: false,
            })
        }
        _ => Ok(PeriodEstimate {
            f_star: 0,
            period_days: min_period_days.min(n),
            fallback_used: true,
        }),
    }
}

/// The last period of a daily series, cut into 12 equal windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampledSequence {
    pub bins: [f64; BINS],
    /// Word exposure over the same windows (always summed).
    pub exposure: [f64; BINS],
    pub bin_width_days: f64,
}

/// Resample the final `period_days` entries into 12 windows of `period_days / 12`
/// days. A day straddling a window boundary is split in proportion to overlap.
/// Sum features add their (fractional) daily mass; ratio features take the
/// overlap-weighted mean.
pub fn resample_last_period(
    series: &[f64],
    exposure: &[f64],
    period_days: usize,
    aggregation: Aggregation,
) -> Result<ResampledSequence> {
    let n = series.len();
    if exposure.len() != n {
        return Err(Error::invalid("series and exposure differ in length"));
    }
    if period_days < MIN_PERIOD_DAYS {
        return Err(Error::invalid(format!(
            "period {period_days} is below the minimum of {MIN_PERIOD_DAYS} days"
        )));
    }
    if period_days > n {
        return Err(Error::invalid(format!(
            "period {period_days} exceeds series length {n}"
        )));
    }
    let offset = n - period_days;
    let width = period_days as f64 / BINS as f64;
    let mut bins = [0.0; BINS];
    let mut exp_bins = [0.0; BINS];
    for day in 0..period_days {
        let (lo, hi) = (day as f64, day as f64 + 1.0);
        let first = ((lo / width).floor() as usize).min(BINS - 1);
        for (k, (bin, exp_bin)) in bins
            .iter_mut()
            .zip(exp_bins.iter_mut())
            .enumerate()
            .skip(first)
        {
            let b_lo = k as f64 * width;
            let b_hi = if k == BINS - 1 {
                period_days as f64
            } else {
                (k + 1) as f64 * width
            };
            if b_lo >= hi {
                break;
            }
            let overlap = hi.min(b_hi) - lo.max(b_lo);
            if overlap > 0.0 {
                *bin += series[offset + day] * overlap;
                *exp_bin += exposure[offset + day] * overlap;
            }
        }
    }
    if aggregation == Aggregation::Ratio {
        for b in &mut bins {
            *b /= width;
        }
    }
    Ok(ResampledSequence {
        bins,
        exposure: exp_bins,
        bin_width_days: width,
    })
}
