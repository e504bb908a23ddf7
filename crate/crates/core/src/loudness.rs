//! Equal-loudness weighting of magnitude spectra.
//!
//! A contour gives, per frequency, the sound pressure level judged as loud as
//! a 1 kHz reference tone. The weighting gain is `L(1 kHz) - L(f)` dB, applied
//! to magnitudes as `10^(gain/20)`, so 1 kHz passes unchanged and low
//! frequencies are attenuated. Between anchors the contour is interpolated
//! with a monotone piecewise cubic (Fritsch-Carlson) in log-frequency.

use std::path::Path;

use crate::cents::db_to_amplitude;
use crate::error::{Error, Result};

const ISO226_2023_50_PHON: &str = include_str!("../data/iso226_2023_50phon.txt");

pub const REFERENCE_HZ: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LoudnessContour {
    phon_level: f64,
    frequencies: Vec<f64>,
    levels: Vec<f64>,
    log_frequencies: Vec<f64>,
    slopes: Vec<f64>,
    reference_level: f64,
}

impl LoudnessContour {
    pub fn new(anchor_points: Vec<(f64, f64)>, phon_level: f64) -> Result<Self> {
        if anchor_points.len() < 2 {
            return Err(Error::DegenerateContour(format!(
                "{} anchor point(s), need at least 2",
                anchor_points.len()
            )));
        }
        for (i, &(f, l)) in anchor_points.iter().enumerate() {
            if !(f > 0.0 && f.is_finite() && l.is_finite()) {
                return Err(Error::DegenerateContour(format!(
                    "anchor {i} ({f}, {l}) is not a finite positive frequency/level"
                )));
            }
        }
        if anchor_points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::DegenerateContour(
                "anchor frequencies must be strictly increasing".into(),
            ));
        }
        let frequencies: Vec<f64> = anchor_points.iter().map(|p| p.0).collect();
        let levels: Vec<f64> = anchor_points.iter().map(|p| p.1).collect();
        let log_frequencies: Vec<f64> = frequencies.iter().map(|f| f.log10()).collect();
        let slopes = monotone_slopes(&log_frequencies, &levels);
        let mut contour = Self {
            phon_level,
            frequencies,
            levels,
            log_frequencies,
            slopes,
            reference_level: 0.0,
        };
        contour.reference_level = contour.level_at(REFERENCE_HZ);
        Ok(contour)
    }

    /// Parses a `frequency_hz level_db` table. Lines starting with `#` and
    /// blank lines are skipped.
    pub fn parse(text: &str, phon_level: f64) -> Result<Self> {
        let mut anchors = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let parse = |field: Option<&str>| -> Result<f64> {
                field
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::DegenerateContour(format!("line {}: {line:?}", lineno + 1))
                    })
            };
            let f = parse(fields.next())?;
            let l = parse(fields.next())?;
            if fields.next().is_some() {
                return Err(Error::DegenerateContour(format!(
                    "line {}: expected two columns",
                    lineno + 1
                )));
            }
            anchors.push((f, l));
        }
        Self::new(anchors, phon_level)
    }

    pub fn load(path: &Path, phon_level: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, phon_level)
    }

    /// The shipped ISO 226:2023 50-phon contour.
    pub fn iso226_50_phon() -> Self {
        Self::parse(ISO226_2023_50_PHON, 50.0).expect("embedded contour table is valid")
    }

    pub fn phon_level(&self) -> f64 {
        self.phon_level
    }

    pub fn anchor_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frequencies.iter().copied().zip(self.levels.iter().copied())
    }

    pub fn min_frequency(&self) -> f64 {
        self.frequencies[0]
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequencies[self.frequencies.len() - 1]
    }

    /// Contour level in dB SPL at `freq`, clamped to the anchor range.
    pub fn level_at(&self, freq: f64) -> f64 {
        let f = freq.clamp(self.min_frequency(), self.max_frequency());
        let x = f.log10();
        let k = match self
            .log_frequencies
            .binary_search_by(|probe| probe.total_cmp(&x))
        {
            Ok(i) => return self.levels[i],
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.log_frequencies[k], self.log_frequencies[k + 1]);
        let (y0, y1) = (self.levels[k], self.levels[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    pub fn gain_db(&self, freq: f64) -> f64 {
        self.reference_level - self.level_at(freq)
    }

    /// Linear magnitude gain; exactly 1 at 1 kHz.
    pub fn gain(&self, freq: f64) -> f64 {
        db_to_amplitude(self.gain_db(freq))
    }
}

/// Fritsch-Carlson tangents: zero at local extrema, harmonic mean otherwise,
/// which keeps each cubic segment within its endpoint values.
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secants: Vec<f64> = (0..n - 1)
        .map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k]))
        .collect();
    if n == 2 {
        return vec![secants[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (s0, s1) = (secants[k - 1], secants[k]);
        if s0 * s1 > 0.0 {
            let h0 = x[k] - x[k - 1];
            let h1 = x[k + 1] - x[k];
            let w0 = 2.0 * h1 + h0;
            let w1 = h1 + 2.0 * h0;
            d[k] = (w0 + w1) / (w0 / s0 + w1 / s1);
        }
    }
    d[0] = end_slope(x[1] - x[0], x[2] - x[1], secants[0], secants[1]);
    d[n - 1] = end_slope(
        x[n - 1] - x[n - 2],
        x[n - 2] - x[n - 3],
        secants[n - 2],
        secants[n - 3],
    );
    d
}

fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d.signum() != s0.signum() {
        0.0
    } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Multiplies each bin magnitude by the contour gain at its frequency.
pub fn weight_spectrum(
    magnitudes: &[f64],
    frequencies: &[f64],
    contour: &LoudnessContour,
) -> Result<Vec<f64>> {
    check_lengths(magnitudes, frequencies)?;
    Ok(magnitudes
        .iter()
        .zip(frequencies)
        .map(|(m, &f)| m * contour.gain(f))
        .collect())
}

/// Inverse of [`weight_spectrum`].
pub fn unweight_spectrum(
    magnitudes: &[f64],
    frequencies: &[f64],
    contour: &LoudnessContour,
) -> Result<Vec<f64>> {
    check_lengths(magnitudes, frequencies)?;
    Ok(magnitudes
        .iter()
        .zip(frequencies)
        .map(|(m, &f)| m / contour.gain(f))
        .collect())
}

fn check_lengths(magnitudes: &[f64], frequencies: &[f64]) -> Result<()> {
    if magnitudes.len() != frequencies.len() {
        return Err(Error::InvalidParameter(format!(
            "{} magnitudes for {} bin frequencies",
            magnitudes.len(),
            frequencies.len()
        )));
    }
    Ok(())
}
