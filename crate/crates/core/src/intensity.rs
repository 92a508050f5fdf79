//! Local-polynomial estimation of a counting-process rate from binned counts.
//!
//! Feature occurrences `N(t)` are modeled as a doubly stochastic Poisson process
//! with intensity `Y(t) a(t)`, `Y` the words posted and `a` the latent rate. The
//! estimator is
//!
//! ```text
//! â(t) = e₁ᵀ A(t)⁻¹ ∫₀¹ K_b(s−t) g(s−t) J(s)/Y(s) dN(s)
//! A(t) = ∫₀¹ K_b(s−t) g(s−t) g(s−t)ᵀ ds,   J(s) = 1{Y(s) > 0}
//! ```
//!
//! with `g(x) = (1, x, …, x^p/p!)`, the Epanechnikov kernel, and `J/Y = 0`
//! where `Y = 0`. Only binned counts are available, so events are spread
//! uniformly over their bin; `A(t)` and the event integral share one
//! composite trapezoid rule laid on the bin grid, which makes the estimator
//! reproduce constant rates exactly. Because `â(t)` is linear in the bin rates
//! `ΔN_i / Y_i`, the per-bin weights are computed once per bandwidth and
//! evaluation point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::Aggregation;
use crate::periodics::{ResampledSequence, BINS};

/// Points in the raw evaluation grid `{0, 1/13, …, 1}`.
pub const EVAL_POINTS: usize = BINS + 2;

const MAX_CONDITION: f64 = 1e12;
const FALLBACK_BANDWIDTH: f64 = 0.5;

/// `0.75 (1 − u²)` on `[−1, 1]`, zero outside.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// `K(u / b) / b`.
pub fn scaled_kernel(u: f64, b: f64) -> f64 {
    epanechnikov(u / b) / b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BandwidthRepr", into = "BandwidthRepr")]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthRepr {
    Name(String),
    Value(f64),
}

impl TryFrom<BandwidthRepr> for Bandwidth {
    type Error = String;

    fn try_from(r: BandwidthRepr) -> std::result::Result<Self, String> {
        match r {
            BandwidthRepr::Name(s) if s == "auto" => Ok(Bandwidth::Auto),
            BandwidthRepr::Name(s) => {
                Err(format!("bandwidth must be \"auto\" or a number, got `{s}`"))
            }
            BandwidthRepr::Value(v) => Ok(Bandwidth::Fixed(v)),
        }
    }
}

impl From<Bandwidth> for BandwidthRepr {
    fn from(b: Bandwidth) -> Self {
        match b {
            Bandwidth::Auto => BandwidthRepr::Name("auto".into()),
            Bandwidth::Fixed(v) => BandwidthRepr::Value(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Rescale to `[0, 1]`; a constant vector maps to zeros.
    MinMax,
    /// Divide by the sum; an all-zero vector stays zero.
    UnitSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Local polynomial degree `p`.
    pub degree: usize,
    pub bandwidth: Bandwidth,
    /// Candidates for the automatic selector.
    pub grid: Vec<f64>,
    /// Quadrature resolution on `[0, 1]`; rounded up to a whole number of
    /// sub-intervals per bin.
    pub quadrature_points: usize,
    /// Ridge added to `A(t)` when its condition number exceeds 1e12.
    pub ridge: f64,
    pub normalization: Normalization,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            degree: 1,
            bandwidth: Bandwidth::Auto,
            grid: vec![0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.7, 1.0],
            quadrature_points: 401,
            ridge: 1e-8,
            normalization: Normalization::MinMax,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree > 3 {
            return Err(Error::config("smoothing.degree", "must be at most 3"));
        }
        let in_range = |b: f64| b > 0.0 && b <= 1.0;
        if let Bandwidth::Fixed(b) = self.bandwidth {
            if !in_range(b) {
                return Err(Error::config("smoothing.bandwidth", "must lie in (0, 1]"));
            }
        }
        if self.grid.is_empty() {
            return Err(Error::config("smoothing.grid", "must not be empty"));
        }
        if self.grid.iter().any(|&b| !in_range(b)) {
            return Err(Error::config("smoothing.grid", "values must lie in (0, 1]"));
        }
        if self.quadrature_points < 2 {
            return Err(Error::config(
                "smoothing.quadrature_points",
                "need at least 2 points",
            ));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::config("smoothing.ridge", "must be nonnegative"));
        }
        Ok(())
    }

    fn intervals_per_bin(&self) -> usize {
        (self.quadrature_points - 1).div_ceil(BINS).max(1)
    }
}

/// Twelve binned increments of `N` and exposures `Y` on `[0, 1]`, bin `i`
/// covering `[i/12, (i+1)/12]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingObservation {
    pub events: [f64; BINS],
    pub exposure: [f64; BINS],
}

impl CountingObservation {
    pub fn new(events: [f64; BINS], exposure: [f64; BINS]) -> Result<Self> {
        let ok = |v: &f64| v.is_finite() && *v >= 0.0;
        if !events.iter().all(ok) || !exposure.iter().all(ok) {
            return Err(Error::invalid(
                "counting observation needs finite nonnegative events and exposure",
            ));
        }
        Ok(Self { events, exposure })
    }

    /// Count features use the binned words as exposure. Ratio features are
    /// already per-word quantities; their exposure is the indicator of any
    /// words in the bin, so the estimate tracks the ratio itself.
    pub fn from_resampled(seq: &ResampledSequence, aggregation: Aggregation) -> Result<Self> {
        let exposure = match aggregation {
            Aggregation::Sum => seq.exposure,
            Aggregation::Ratio => seq.exposure.map(|y| if y > 0.0 { 1.0 } else { 0.0 }),
        };
        Self::new(seq.bins, exposure)
    }

    /// `J_i ΔN_i / Y_i`.
    pub fn rates(&self) -> [f64; BINS] {
        std::array::from_fn(|i| {
            if self.exposure[i] > 0.0 {
                self.events[i] / self.exposure[i]
            } else {
                0.0
            }
        })
    }
}

/// Bin midpoints `(i − 0.5)/12`, `i = 1..=12`.
pub fn bin_midpoints() -> [f64; BINS] {
    std::array::from_fn(|i| (i as f64 + 0.5) / BINS as f64)
}

/// Raw evaluation grid `{0, 1/13, …, 1}`.
pub fn eval_grid() -> [f64; EVAL_POINTS] {
    std::array::from_fn(|j| j as f64 / (EVAL_POINTS - 1) as f64)
}

fn basis(x: f64, degree: usize, out: &mut [f64]) {
    let mut term = 1.0;
    out[0] = 1.0;
    for k in 1..=degree {
        term *= x / k as f64;
        out[k] = term;
    }
}

/// Per-bin weights `w_i(t) = e₁ᵀ A(t)⁻¹ ∫_{bin i} K_b(s−t) g(s−t) ds`, so that
/// `â(t) = Σ_i w_i(t) J_i ΔN_i / Y_i`.
pub fn bin_weights(t: f64, b: f64, config: &KernelConfig) -> Result<[f64; BINS]> {
    weights_without(t, b, config, None)
}

/// As [`bin_weights`], with bin `skip` removed from both `A(t)` and the event sum.
fn weights_without(
    t: f64,
    b: f64,
    config: &KernelConfig,
    skip: Option<usize>,
) -> Result<[f64; BINS]> {
    let dim = config.degree + 1;
    let m = config.intervals_per_bin();
    let h = 1.0 / (BINS * m) as f64;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut v = vec![DVector::<f64>::zeros(dim); BINS];
    let mut g = vec![0.0; dim];
    for (bin, vi) in v.iter_mut().enumerate() {
        if skip == Some(bin) {
            continue;
        }
        for q in 0..=m {
            let s = (bin * m + q) as f64 * h;
            let w = if q == 0 || q == m { 0.5 * h } else { h };
            let k = scaled_kernel(s - t, b);
            if k == 0.0 {
                continue;
            }
            basis(s - t, config.degree, &mut g);
            for r in 0..dim {
                vi[r] += w * k * g[r];
                for c in 0..dim {
                    a[(r, c)] += w * k * g[r] * g[c];
                }
            }
        }
    }

    let svd = a.clone().svd(false, false);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) || s_max / s_min > MAX_CONDITION || !s_min.is_finite() {
        for d in 0..dim {
            a[(d, d)] += config.ridge;
        }
    }
    // Solve Aᵀ u = e₁; then w_i = uᵀ v_i.
    let mut e1 = DVector::<f64>::zeros(dim);
    e1[0] = 1.0;
    let u = a
        .transpose()
        .lu()
        .solve(&e1)
        .ok_or_else(|| Error::invalid(format!("A(t) singular at t={t}, b={b}")))?;
    let mut out = [0.0; BINS];
    for (o, vi) in out.iter_mut().zip(&v) {
        *o = u.dot(vi);
    }
    if out.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite weights at t={t}, b={b}"
        )));
    }
    Ok(out)
}

/// `â(t)` for a fixed bandwidth, floored at zero.
pub fn estimate_intensity(obs: &CountingObservation, config: &KernelConfig, t: f64) -> Result<f64> {
    let b = match config.bandwidth {
        Bandwidth::Fixed(b) => b,
        Bandwidth::Auto => {
            return Err(Error::invalid("resolve the bandwidth before estimating"));
        }
    };
    if !t.is_finite() || !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!(
            "evaluation point {t} outside [0, 1]"
        )));
    }
    let obs = CountingObservation::new(obs.events, obs.exposure)?;
    let w = bin_weights(t, b, config)?;
    Ok(apply(&w, &obs.rates()))
}

fn apply(weights: &[f64; BINS], rates: &[f64; BINS]) -> f64 {
    weights
        .iter()
        .zip(rates)
        .map(|(w, r)| w * r)
        .sum::<f64>()
        .max(0.0)
}

/// Precomputed weights for one bandwidth.
#[derive(Debug, Clone)]
struct BandwidthWeights {
    b: f64,
    /// Weights at the 14 evaluation points.
    eval: [[f64; BINS]; EVAL_POINTS],
    /// Weights at each bin midpoint with that bin left out; `None` when the
    /// reduced fit is degenerate.
    held_out: [Option<[f64; BINS]>; BINS],
}

impl BandwidthWeights {
    fn new(b: f64, config: &KernelConfig) -> Result<Self> {
        let mut eval = [[0.0; BINS]; EVAL_POINTS];
        for (row, t) in eval.iter_mut().zip(eval_grid()) {
            *row = bin_weights(t, b, config)?;
        }
        let mids = bin_midpoints();
        let held_out = std::array::from_fn(|i| weights_without(mids[i], b, config, Some(i)).ok());
        Ok(Self { b, eval, held_out })
    }

    /// Poisson deviance of leave-one-bin-out predictions over observed bins.
    fn loo_deviance(&self, obs: &CountingObservation, rates: &[f64; BINS]) -> f64 {
        let mut dev = 0.0;
        for i in 0..BINS {
            let y = obs.exposure[i];
            if y <= 0.0 {
                continue;
            }
            let Some(w) = &self.held_out[i] else {
                return f64::INFINITY;
            };
            let predicted = (apply(w, rates) * y).max(1e-12);
            let observed = obs.events[i];
            let log_term = if observed > 0.0 {
                observed * (observed / predicted).ln()
            } else {
                0.0
            };
            dev += 2.0 * (log_term - (observed - predicted));
        }
        dev
    }
}

/// Leave-one-bin-out Poisson-deviance choice among `grid`; ties go to the
/// smaller bandwidth.
pub fn select_bandwidth(obs: &CountingObservation, config: &KernelConfig) -> Result<f64> {
    let smoother = IntensitySmoother::new(&KernelConfig {
        bandwidth: Bandwidth::Auto,
        ..config.clone()
    })?;
    smoother.select(obs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedSequence {
    pub bandwidth: f64,
    /// `â` on the 14-point grid.
    pub raw_estimate: [f64; EVAL_POINTS],
    /// `raw_estimate` without its first and last entries.
    pub trimmed: [f64; BINS],
    pub normalized: [f64; BINS],
}

/// Reusable smoother holding kernel weights for every bandwidth it may use.
#[derive(Debug, Clone)]
pub struct IntensitySmoother {
    config: KernelConfig,
    candidates: Vec<BandwidthWeights>,
    fixed: Option<usize>,
}

impl IntensitySmoother {
    pub fn new(config: &KernelConfig) -> Result<Self> {
        config.validate()?;
        let mut grid = config.grid.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let (bandwidths, fixed) = match config.bandwidth {
            Bandwidth::Fixed(b) => (vec![b], Some(0)),
            Bandwidth::Auto => {
                let mut all = grid;
                if !all.contains(&FALLBACK_BANDWIDTH) {
                    all.push(FALLBACK_BANDWIDTH);
                }
                (all, None)
            }
        };
        let candidates = bandwidths
            .into_iter()
            .map(|b| BandwidthWeights::new(b, config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            candidates,
            fixed,
        })
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    fn select(&self, obs: &CountingObservation) -> Result<f64> {
        let rates = obs.rates();
        let mut best: Option<(f64, f64)> = None;
        for w in self
            .candidates
            .iter()
            .filter(|w| self.config.grid.contains(&w.b))
        {
            let dev = w.loo_deviance(obs, &rates);
            if !dev.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some((b_best, d_best)) => dev < d_best || (dev == d_best && w.b < b_best),
            };
            if better {
                best = Some((w.b, dev));
            }
        }
        best.map(|(b, _)| b).ok_or_else(|| {
            Error::Selector("every candidate bandwidth gave a non-finite deviance".into())
        })
    }

    /// Evaluate on the 14-point grid, drop both ends, normalize.
    pub fn smooth(&self, obs: &CountingObservation) -> Result<SmoothedSequence> {
        let obs = CountingObservation::new(obs.events, obs.exposure)?;
        let idx = match self.fixed {
            Some(i) => i,
            None => {
                let b = self.select(&obs).unwrap_or(FALLBACK_BANDWIDTH);
                self.candidates
                    .iter()
                    .position(|w| w.b == b)
                    .expect("candidate present")
            }
        };
        let weights = &self.candidates[idx];
        let rates = obs.rates();
        let raw_estimate: [f64; EVAL_POINTS] =
            std::array::from_fn(|j| apply(&weights.eval[j], &rates));
        let trimmed: [f64; BINS] = std::array::from_fn(|i| raw_estimate[i + 1]);
        Ok(SmoothedSequence {
            bandwidth: weights.b,
            raw_estimate,
            trimmed,
            normalized: normalize(&trimmed, self.config.normalization),
        })
    }
}

/// One-shot smoothing; prefer [`IntensitySmoother`] for many sequences.
pub fn smooth_sequence(
    obs: &CountingObservation,
    config: &KernelConfig,
) -> Result<SmoothedSequence> {
    IntensitySmoother::new(config)?.smooth(obs)
}

pub fn normalize(values: &[f64; BINS], mode: Normalization) -> [f64; BINS] {
    match mode {
        Normalization::MinMax => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            if range > 0.0 {
                values.map(|v| ((v - lo) / range).clamp(0.0, 1.0))
            } else {
                [0.0; BINS]
            }
        }
        Normalization::UnitSum => {
            let total: f64 = values.iter().sum();
            if total > 0.0 {
                values.map(|v| v / total)
            } else {
                [0.0; BINS]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(b: f64) -> KernelConfig {
        KernelConfig {
            bandwidth: Bandwidth::Fixed(b),
            ..Default::default()
        }
    }

    fn obs(events: [f64; BINS], exposure: [f64; BINS]) -> CountingObservation {
        CountingObservation::new(events, exposure).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(epanechnikov(0.0), 0.75);
        assert_eq!(epanechnikov(1.0), 0.0);
        assert_eq!(epanechnikov(-1.0), 0.0);
        assert_eq!(epanechnikov(1.5), 0.0);
        assert!((scaled_kernel(0.0, 0.5) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn kernel_integrates_to_one() {
        // Composite Simpson on [-1, 1].
        let n = 2000;
        let h = 2.0 / n as f64;
        let mut s = epanechnikov(-1.0) + epanechnikov(1.0);
        for i in 1..n {
            let u = -1.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * epanechnikov(u);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_exposure_gives_zero() {
        let o = obs([3.0; BINS], [0.0; BINS]);
        for t in eval_grid() {
            assert_eq!(estimate_intensity(&o, &fixed(0.3), t).unwrap(), 0.0);
        }
        let s = smooth_sequence(&o, &KernelConfig::default()).unwrap();
        assert_eq!(s.normalized, [0.0; BINS]);
    }

    #[test]
    fn reproduces_constant_rate() {
        for p in 0..=3 {
            for b in [0.15, 0.3, 0.5, 1.0] {
                let cfg = KernelConfig {
                    degree: p,
                    ..fixed(b)
                };
                let o = obs([2.5 * 8.0; BINS], [8.0; BINS]);
                for k in 0..=30 {
                    let t = 0.2 + 0.6 * k as f64 / 30.0;
                    let a = estimate_intensity(&o, &cfg, t).unwrap();
                    assert!((a - 2.5).abs() < 1e-3, "p={p} b={b} t={t} a={a}");
                }
            }
        }
    }

    #[test]
    fn zero_exposure_bin_is_ignored() {
        let mut exposure = [10.0; BINS];
        exposure[4] = 0.0;
        let mut events = [5.0; BINS];
        events[4] = 99.0;
        let a = estimate_intensity(&obs(events, exposure), &fixed(0.4), 0.4).unwrap();
        assert!(a.is_finite());
        assert!(a < 0.5 + 1e-9);
    }

    #[test]
    fn exposure_scaling_invariance() {
        let events = [1.0, 0.0, 4.0, 2.0, 0.0, 7.0, 3.0, 1.0, 0.0, 2.0, 5.0, 1.0];
        let exposure = [
            10.0, 0.0, 30.0, 12.0, 8.0, 40.0, 20.0, 9.0, 0.0, 15.0, 33.0, 6.0,
        ];
        let a = obs(events, exposure);
        let b = obs(events.map(|v| v * 7.0), exposure.map(|v| v * 7.0));
        for t in eval_grid() {
            let x = estimate_intensity(&a, &fixed(0.3), t).unwrap();
            let y = estimate_intensity(&b, &fixed(0.3), t).unwrap();
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn smoother_matches_pointwise_estimator() {
        let events = [1.0, 3.0, 4.0, 2.0, 0.0, 7.0, 3.0, 1.0, 0.0, 2.0, 5.0, 1.0];
        let exposure = [10.0; BINS];
        let o = obs(events, exposure);
        let cfg = fixed(0.25);
        let s = smooth_sequence(&o, &cfg).unwrap();
        for (j, t) in eval_grid().into_iter().enumerate() {
            let direct = estimate_intensity(&o, &cfg, t).unwrap();
            assert!((s.raw_estimate[j] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn structural_lengths_and_trim() {
        let o = obs(
            [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.0],
            [10.0; BINS],
        );
        let s = smooth_sequence(&o, &KernelConfig::default()).unwrap();
        assert_eq!(s.raw_estimate.len(), 14);
        assert_eq!(s.trimmed.len(), 12);
        assert_eq!(&s.raw_estimate[1..13], &s.trimmed[..]);
        let lo = s.normalized.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s
            .normalized
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn single_candidate_grid() {
        let cfg = KernelConfig {
            grid: vec![0.35],
            ..Default::default()
        };
        let o = obs([1.0; BINS], [3.0; BINS]);
        assert_eq!(select_bandwidth(&o, &cfg).unwrap(), 0.35);
    }

    #[test]
    fn selector_is_deterministic() {
        let o = obs(
            [1.0, 3.0, 0.0, 2.0, 5.0, 1.0, 0.0, 2.0, 4.0, 1.0, 1.0, 3.0],
            [9.0; BINS],
        );
        let cfg = KernelConfig::default();
        assert_eq!(
            select_bandwidth(&o, &cfg).unwrap(),
            select_bandwidth(&o, &cfg).unwrap()
        );
    }

    #[test]
    fn selector_prefers_wide_for_constant_rates() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Poisson};
        let cfg = KernelConfig::default();
        let mut chosen = std::collections::BTreeMap::new();
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pois = Poisson::new(40.0 * 0.5).unwrap();
            let events: [f64; BINS] = std::array::from_fn(|_| pois.sample(&mut rng));
            let b = select_bandwidth(&obs(events, [40.0; BINS]), &cfg).unwrap();
            *chosen.entry((b * 100.0) as u32).or_insert(0) += 1;
        }
        let widest = chosen[&100];
        assert!(
            widest >= 50 && chosen.values().all(|&c| c <= widest),
            "{chosen:?}"
        );
    }

    #[test]
    fn selector_prefers_narrow_for_sharp_signal() {
        let events: [f64; BINS] = std::array::from_fn(|i| {
            1000.0 * (2.0 + (std::f64::consts::TAU * (i as f64 + 0.5) / 12.0).sin())
        });
        assert_eq!(
            select_bandwidth(&obs(events, [1000.0; BINS]), &KernelConfig::default()).unwrap(),
            0.15
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(CountingObservation::new([f64::NAN; BINS], [1.0; BINS]).is_err());
        assert!(CountingObservation::new([1.0; BINS], [-1.0; BINS]).is_err());
        let cfg = KernelConfig {
            degree: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(estimate_intensity(
            &obs([1.0; BINS], [1.0; BINS]),
            &KernelConfig::default(),
            0.5
        )
        .is_err());
    }

    #[test]
    fn normalization_modes() {
        let v = [2.0, 4.0, 6.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0];
        let m = normalize(&v, Normalization::MinMax);
        assert_eq!(m[2], 1.0);
        assert_eq!(m[1], 0.5);
        let u = normalize(&v, Normalization::UnitSum);
        assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(normalize(&[5.0; BINS], Normalization::MinMax), [0.0; BINS]);
    }

    #[test]
    fn bandwidth_serde() {
        let auto: Bandwidth = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(auto, Bandwidth::Auto);
        let b: Bandwidth = serde_json::from_str("0.3").unwrap();
        assert_eq!(b, Bandwidth::Fixed(0.3));
        assert!(serde_json::from_str::<Bandwidth>("\"wide\"").is_err());
    }
}
