//! Confusion matrices and the accuracy / exact CI / NIR / p-value / kappa block.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

pub const CLASSES: usize = 3;

/// Counts with rows = prediction and columns = reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; CLASSES]; CLASSES],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; CLASSES]; CLASSES]) -> Result<Self> {
        let m = Self { counts };
        if m.total() == 0 {
            return Err(Error::invalid("confusion matrix is empty"));
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> [u64; CLASSES] {
        std::array::from_fn(|i| self.counts[i].iter().sum())
    }

    pub fn col_sums(&self) -> [u64; CLASSES] {
        std::array::from_fn(|j| (0..CLASSES).map(|i| self.counts[i][j]).sum())
    }

    /// Parse three whitespace-separated rows of three counts, each optionally led by
    /// its row label. Lines not starting with a number are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() || fields[0].parse::<u64>().is_err() {
                continue;
            }
            let nums: Vec<&str> = if fields.len() == CLASSES + 1 {
                fields[1..].to_vec()
            } else {
                fields
            };
            if nums.len() != CLASSES {
                return Err(Error::invalid(format!(
                    "matrix line `{line}`: expected {CLASSES} counts"
                )));
            }
            let row = nums
                .iter()
                .map(|s| {
                    s.parse::<u64>()
                        .map_err(|_| Error::invalid(format!("bad count `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push([row[0], row[1], row[2]]);
        }
        if rows.len() != CLASSES {
            return Err(Error::invalid(format!(
                "expected {CLASSES} matrix rows, found {}",
                rows.len()
            )));
        }
        Self::new([rows[0], rows[1], rows[2]])
    }
}

pub fn confusion(predictions: &[usize], references: &[usize]) -> Result<ConfusionMatrix> {
    if predictions.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} references",
            predictions.len(),
            references.len()
        )));
    }
    let mut counts = [[0u64; CLASSES]; CLASSES];
    for (&p, &r) in predictions.iter().zip(references) {
        if p >= CLASSES || r >= CLASSES {
            return Err(Error::invalid(format!(
                "label pair ({p}, {r}) outside 0..{CLASSES}"
            )));
        }
        counts[p][r] += 1;
    }
    ConfusionMatrix::new(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsBlock {
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub nir: f64,
    pub p_value: f64,
    pub kappa: f64,
}

fn bisect(mut lo: f64, mut hi: f64, increasing: bool, f: impl Fn(f64) -> f64, target: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Exact Clopper–Pearson interval for `x` successes in `n` trials.
pub fn clopper_pearson(x: u64, n: u64, alpha: f64) -> (f64, f64) {
    let (xf, nf) = (x as f64, n as f64);
    let tail = alpha / 2.0;
    // P[X >= x | p] = I_p(x, n - x + 1), increasing in p.
    let low = if x == 0 {
        0.0
    } else {
        bisect(0.0, 1.0, true, |p| beta_reg(xf, nf - xf + 1.0, p), tail)
    };
    // P[X <= x | p] = 1 - I_p(x + 1, n - x), decreasing in p.
    let high = if x == n {
        1.0
    } else {
        bisect(
            0.0,
            1.0,
            false,
            |p| 1.0 - beta_reg(xf + 1.0, nf - xf, p),
            tail,
        )
    };
    (low, high)
}

/// `P[X >= x]` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_tail(x: u64, n: u64, p: f64) -> f64 {
    if x == 0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (x..=n)
        .map(|j| (ln_binomial(n, j) + j as f64 * lp + (n - j) as f64 * lq).exp())
        .sum::<f64>()
        .min(1.0)
}

pub fn stats(m: &ConfusionMatrix, alpha: f64) -> Result<StatsBlock> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let n = m.total();
    if n == 0 {
        return Err(Error::invalid("confusion matrix is empty"));
    }
    let nf = n as f64;
    let x = m.correct();
    let accuracy = x as f64 / nf;
    let (ci_low, ci_high) = clopper_pearson(x, n, alpha);
    let cols = m.col_sums();
    let rows = m.row_sums();
    let nir = *cols.iter().max().unwrap() as f64 / nf;
    let p_value = binomial_upper_tail(x, n, nir);
    let pe = rows
        .iter()
        .zip(&cols)
        .map(|(&r, &c)| r as f64 * c as f64)
        .sum::<f64>()
        / (nf * nf);
    let kappa = if pe >= 1.0 {
        1.0
    } else {
        (accuracy - pe) / (1.0 - pe)
    };
    Ok(StatsBlock {
        accuracy,
        ci_low,
        ci_high,
        nir,
        p_value,
        kappa,
    })
}

/// Significant-digit formatting in the style of R's `format(x, digits = 4)`.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    if exp < -4 {
        let s = format!("{:.*e}", digits - 1, v);
        let (mant, e) = s.split_once('e').unwrap();
        let mant = strip_zeros(mant);
        let e: i32 = e.parse().unwrap();
        return format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    strip_zeros(&format!("{v:.decimals$}"))
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// The matrix and statistics as a tab-separated text block.
pub fn render(m: &ConfusionMatrix, s: &StatsBlock, alpha: f64) -> String {
    let mut out = String::from("Confusion Matrix and Statistics\n\n\tReference\t\t\nPrediction");
    for j in 0..CLASSES {
        write!(out, "\t{j}").unwrap();
    }
    out.push('\n');
    for (i, row) in m.counts.iter().enumerate() {
        write!(out, "{i}").unwrap();
        for c in row {
            write!(out, "\t{c}").unwrap();
        }
        out.push('\n');
    }
    let f = |v: f64| format_sig(v, 4);
    let level = format_sig((1.0 - alpha) * 100.0, 4);
    write!(
        out,
        "\nAccuracy : {}\n\n{level}% CI : ({}, {})\n\nNo Information Rate : {}\n\nP-Value [Acc > NIR] : {}\n\nKappa : {}\n",
        f(s.accuracy),
        f(s.ci_low),
        f(s.ci_high),
        f(s.nir),
        f(s.p_value),
        f(s.kappa)
    )
    .unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Binomial CDF from the definition, for oracle bisection.
    fn cdf(k: i64, n: u64, p: f64) -> f64 {
        (0..=k.max(-1))
            .filter(|&j| j >= 0)
            .map(|j| {
                let j = j as u64;
                let mut c = 1.0;
                for t in 0..j {
                    c *= (n - t) as f64 / (t + 1) as f64;
                }
                c * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32)
            })
            .sum()
    }

    fn cp_oracle(x: u64, n: u64, alpha: f64) -> (f64, f64) {
        let solve = |f: &dyn Fn(f64) -> f64| {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let low = if x == 0 {
            0.0
        } else {
            solve(&|p| (1.0 - cdf(x as i64 - 1, n, p)) - alpha / 2.0)
        };
        let high = if x == n {
            1.0
        } else {
            solve(&|p| alpha / 2.0 - cdf(x as i64, n, p))
        };
        (low, high)
    }

    #[test]
    fn confusion_cells() {
        let m = confusion(&[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(m.counts, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
        let m = confusion(&[0, 0], &[1, 1]).unwrap();
        assert_eq!(m.counts[0][1], 2);
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[0], &[0, 1]).is_err());
        assert!(confusion(&[3], &[0]).is_err());
    }

    #[test]
    fn clopper_pearson_matches_binomial_oracle() {
        for n in [1u64, 5, 9, 20, 67] {
            for x in 0..=n {
                let (a, b) = clopper_pearson(x, n, 0.05);
                let (c, d) = cp_oracle(x, n, 0.05);
                assert!((a - c).abs() < 1e-7 && (b - d).abs() < 1e-7, "x={x} n={n}");
            }
        }
    }

    #[test]
    fn first_reported_block() {
        let m = ConfusionMatrix::new([[2, 0, 1], [0, 3, 1], [1, 0, 1]]).unwrap();
        let s = stats(&m, 0.05).unwrap();
        for (got, want) in [
            (s.accuracy, 0.6667),
            (s.ci_low, 0.2993),
            (s.ci_high, 0.9251),
            (s.nir, 0.3333),
            (s.p_value, 0.04242),
            (s.kappa, 0.5),
        ] {
            assert!((got - want).abs() <= 5e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn second_reported_block() {
        let m = ConfusionMatrix::new([[2, 1, 0], [0, 3, 0], [1, 0, 2]]).unwrap();
        let s = stats(&m, 0.05).unwrap();
        for (got, want) in [
            (s.accuracy, 0.7778),
            (s.ci_low, 0.3999),
            (s.ci_high, 0.9719),
            (s.nir, 0.4444),
            (s.p_value, 0.04635),
            (s.kappa, 0.6667),
        ] {
            assert!((got - want).abs() <= 5e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn perfect_diagonal() {
        let m = ConfusionMatrix::new([[3, 0, 0], [0, 3, 0], [0, 0, 3]]).unwrap();
        let s = stats(&m, 0.05).unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert_eq!(s.kappa, 1.0);
        assert!((s.nir - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.ci_high, 1.0);
    }

    #[test]
    fn single_class_agreement_is_kappa_one() {
        let m = ConfusionMatrix::new([[4, 0, 0], [0, 0, 0], [0, 0, 0]]).unwrap();
        assert_eq!(stats(&m, 0.05).unwrap().kappa, 1.0);
    }

    #[test]
    fn r_style_formatting() {
        assert_eq!(format_sig(2.0 / 3.0, 4), "0.6667");
        assert_eq!(format_sig(0.5, 4), "0.5");
        assert_eq!(format_sig(0.042418, 4), "0.04242");
        assert_eq!(format_sig(1.0, 4), "1");
        assert_eq!(format_sig(95.0, 4), "95");
        assert_eq!(format_sig(1.234e-6, 4), "1.234e-06");
        assert_eq!(format_sig(0.0, 4), "0");
    }

    #[test]
    fn rendered_block_layout() {
        let m = ConfusionMatrix::new([[2, 0, 1], [0, 3, 1], [1, 0, 1]]).unwrap();
        let text = render(&m, &stats(&m, 0.05).unwrap(), 0.05);
        let expected =
            "\tReference\t\t\nPrediction\t0\t1\t2\n0\t2\t0\t1\n1\t0\t3\t1\n2\t1\t0\t1\n\n\
Accuracy : 0.6667\n\n95% CI : (0.2993, 0.9251)\n\nNo Information Rate : 0.3333\n\n\
P-Value [Acc > NIR] : 0.04242\n\nKappa : 0.5\n";
        assert!(text.ends_with(expected), "{text}");
        assert_eq!(
            ConfusionMatrix::parse(&text[..text.find("Accuracy").unwrap()]).unwrap(),
            m
        );
    }
}
