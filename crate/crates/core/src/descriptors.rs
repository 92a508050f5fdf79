//! Six-column summaries of smoothed sequences: level, spread and low-frequency spectrum.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::SmoothedSequence;
use crate::periodics::{dft, BINS};

pub const COLUMNS: [&str; 6] = ["avg", "sd", "amp0", "amp1", "amp2", "arg1"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorRow {
    /// Mean of the trimmed (pre-normalization) sequence.
    pub avg: f64,
    /// Sample standard deviation of the trimmed sequence.
    pub sd: f64,
    /// DFT amplitudes (1/N scaling) of the normalized sequence at 0, 1, 2 cycles per period.
    pub amp0: f64,
    pub amp1: f64,
    pub amp2: f64,
    /// Phase of the strongest non-DC component, in (−π, π].
    pub arg1: f64,
}

impl DescriptorRow {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.avg, self.sd, self.amp0, self.amp1, self.amp2, self.arg1,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            avg: a[0],
            sd: a[1],
            amp0: a[2],
            amp1: a[3],
            amp2: a[4],
            arg1: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Spectral columns `(amp0, amp1, amp2, arg1)` of a normalized length-12 sequence.
pub fn spectral_columns(normalized: &[f64; BINS]) -> (f64, f64, f64, f64) {
    let spec = dft(normalized).expect("12 finite samples");
    let mut best = 1;
    for f in 2..=BINS / 2 {
        if spec.amplitudes[f] > spec.amplitudes[best] * (1.0 + 1e-9) {
            best = f;
        }
    }
    let arg1 = if spec.amplitudes[best] < 1e-12 {
        0.0
    } else if spec.phases[best] <= -PI {
        PI
    } else {
        spec.phases[best]
    };
    (
        spec.amplitudes[0],
        spec.amplitudes[1],
        spec.amplitudes[2],
        arg1,
    )
}

pub fn describe(smoothed: &SmoothedSequence) -> DescriptorRow {
    let t = &smoothed.trimmed;
    let n = t.len() as f64;
    let avg = t.iter().sum::<f64>() / n;
    let sd = (t.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (amp0, amp1, amp2, arg1) = spectral_columns(&smoothed.normalized);
    DescriptorRow {
        avg,
        sd,
        amp0,
        amp1,
        amp2,
        arg1,
    }
}

/// Descriptor rows of one feature over a population, in population order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorMatrix {
    pub feature: String,
    pub users: Vec<String>,
    pub rows: Vec<DescriptorRow>,
}

impl DescriptorMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn values(&self) -> Vec<[f64; 6]> {
        self.rows.iter().map(DescriptorRow::to_array).collect()
    }
}

pub fn build_descriptor_matrix(
    feature: &str,
    users: &[String],
    smoothed: &[SmoothedSequence],
) -> Result<DescriptorMatrix> {
    if users.len() != smoothed.len() {
        return Err(Error::invalid(format!(
            "feature {feature}: {} users but {} sequences",
            users.len(),
            smoothed.len()
        )));
    }
    Ok(DescriptorMatrix {
        feature: feature.to_string(),
        users: users.to_vec(),
        rows: smoothed.iter().map(describe).collect(),
    })
}

/// Long-format CSV: `feature,user,avg,sd,amp0,amp1,amp2,arg1`.
pub fn write_csv<'a>(
    matrices: impl IntoIterator<Item = &'a DescriptorMatrix>,
    mut out: impl Write,
) -> Result<()> {
    let io = |e| Error::io("writing descriptor csv", e);
    writeln!(out, "feature,user,{}", COLUMNS.join(",")).map_err(io)?;
    for m in matrices {
        for (user, row) in m.users.iter().zip(&m.rows) {
            let cols: Vec<String> = row.to_array().iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{}", m.feature, user, cols.join(",")).map_err(io)?;
        }
    }
    Ok(())
}

/// Parse the long-format CSV back into per-feature matrices, in first-seen feature order.
pub fn read_csv(input: impl BufRead) -> Result<Vec<DescriptorMatrix>> {
    let mut out: Vec<DescriptorMatrix> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("reading descriptor csv", e))?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(Error::invalid(format!(
                "descriptor csv line {}: expected 8 fields",
                i + 1
            )));
        }
        let mut vals = [0.0; 6];
        for (v, p) in vals.iter_mut().zip(&parts[2..]) {
            *v = p.parse().map_err(|_| {
                Error::invalid(format!("descriptor csv line {}: bad number `{p}`", i + 1))
            })?;
        }
        let feature = parts[0];
        let m = match out.iter_mut().position(|m| m.feature == feature) {
            Some(idx) => &mut out[idx],
            None => {
                out.push(DescriptorMatrix {
                    feature: feature.to_string(),
                    users: Vec::new(),
                    rows: Vec::new(),
                });
                out.last_mut().unwrap()
            }
        };
        m.users.push(parts[1].to_string());
        m.rows.push(DescriptorRow::from_array(vals));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::{normalize, Normalization, EVAL_POINTS};

    fn smoothed(trimmed: [f64; BINS], normalized: [f64; BINS]) -> SmoothedSequence {
        let mut raw = [0.0; EVAL_POINTS];
        raw[1..13].copy_from_slice(&trimmed);
        SmoothedSequence {
            bandwidth: 0.3,
            raw_estimate: raw,
            trimmed,
            normalized,
        }
    }

    #[test]
    fn constant_sequence() {
        let s = smoothed([5.0; BINS], normalize(&[5.0; BINS], Normalization::MinMax));
        let d = describe(&s);
        assert_eq!(d.avg, 5.0);
        assert_eq!(d.sd, 0.0);
        assert_eq!((d.amp0, d.amp1, d.amp2, d.arg1), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn half_sine_oracle() {
        let norm: [f64; BINS] =
            std::array::from_fn(|t| 0.5 + 0.5 * (2.0 * PI * t as f64 / 12.0).sin());
        // Direct-sum oracle: X(1) = Σ 0.5 sin(2πt/12) e^{-2πit/12} = -3i.
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in norm.iter().enumerate() {
            let ang = -2.0 * PI * t as f64 / 12.0;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        assert!((re.hypot(im) / 12.0 - 0.25).abs() < 1e-12);

        let d = describe(&smoothed(norm, norm));
        assert!((d.amp0 - 0.5).abs() < 1e-12);
        assert!((d.amp1 - 0.25).abs() < 1e-12);
        assert!(d.amp2.abs() < 1e-12);
        assert!((d.arg1 + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn amp0_is_mean_of_normalized() {
        let norm = [0.0, 0.2, 1.0, 0.4, 0.3, 0.9, 0.1, 0.5, 0.6, 0.7, 0.2, 0.8];
        let (amp0, ..) = spectral_columns(&norm);
        assert!((amp0 - norm.iter().sum::<f64>() / 12.0).abs() < 1e-12);
    }

    #[test]
    fn constant_shift_moves_only_amp0() {
        let norm = [0.0, 0.2, 1.0, 0.4, 0.3, 0.9, 0.1, 0.5, 0.6, 0.7, 0.2, 0.8];
        let shifted = norm.map(|v| v + 0.25);
        let (a0, a1, a2, p) = spectral_columns(&norm);
        let (b0, b1, b2, q) = spectral_columns(&shifted);
        assert!((b0 - (a0 + 0.25)).abs() < 1e-12);
        assert!((a1 - b1).abs() < 1e-12);
        assert!((a2 - b2).abs() < 1e-12);
        assert!((p - q).abs() < 1e-9);
    }

    #[test]
    fn arg1_excludes_pi_minus() {
        // cos at the Nyquist-free f=1 with phase π: -cos(2πt/12).
        let norm: [f64; BINS] =
            std::array::from_fn(|t| 0.5 - 0.5 * (2.0 * PI * t as f64 / 12.0).cos());
        let (_, _, _, arg) = spectral_columns(&norm);
        assert!(arg > -PI && arg <= PI);
        assert!((arg.abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn matrix_order_and_shape() {
        let a = smoothed([1.0; BINS], [0.0; BINS]);
        let b = smoothed(
            std::array::from_fn(|i| i as f64),
            std::array::from_fn(|i| i as f64 / 11.0),
        );
        let users = vec!["x".to_string(), "y".to_string()];
        let m = build_descriptor_matrix("f", &users, &[a.clone(), b.clone()]).unwrap();
        let r =
            build_descriptor_matrix("f", &[users[1].clone(), users[0].clone()], &[b, a]).unwrap();
        assert_eq!(m.rows[0], r.rows[1]);
        assert_eq!(m.rows[1], r.rows[0]);
        assert!(build_descriptor_matrix("f", &users[..1], &[]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let b = smoothed(
            std::array::from_fn(|i| i as f64 * 0.37),
            std::array::from_fn(|i| i as f64 / 11.0),
        );
        let m = build_descriptor_matrix("textmind_body", &["u1".into()], &[b]).unwrap();
        let mut buf = Vec::new();
        write_csv([&m], &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![m]);
    }
}
