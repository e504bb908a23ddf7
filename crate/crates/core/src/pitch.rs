//! Spectral and temporal pitch estimates, and the discrepancy between them.
//!
//! Four views are kept apart:
//! - `lowest_partial`: frequency of the lowest surviving partial track;
//! - `gcd_f0`: the fundamental in the greatest-common-divisor sense, the
//!   largest frequency of which every partial is a near-integer multiple;
//! - `autocorrelation`: periodicity of the waveform;
//! - `partial_spacing`: median distance between consecutive partials.
//!
//! Candidates are reported raw; no octave correction is attempted.

use std::fmt;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cents::{cents_between, CENTS_PER_OCTAVE};
use crate::error::{Error, Result};
use crate::signal::{frame, Signal, Window};
use crate::spectral::{ComplexToneSnapshot, FramingParams, PartialTrack};

pub const DEFAULT_MIN_F0: f64 = 20.0;
pub const DEFAULT_GCD_TOLERANCE_CENTS: f64 = 30.0;
pub const DEFAULT_ACF_MIN_FREQ: f64 = 25.0;
pub const DEFAULT_ACF_MAX_FREQ: f64 = 2000.0;
pub const DEFAULT_ACF_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PitchMethod {
    LowestPartial,
    GcdF0,
    Autocorrelation,
    PartialSpacing,
}

impl PitchMethod {
    pub const ALL: [PitchMethod; 4] = [
        PitchMethod::LowestPartial,
        PitchMethod::GcdF0,
        PitchMethod::Autocorrelation,
        PitchMethod::PartialSpacing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PitchMethod::LowestPartial => "lowest_partial",
            PitchMethod::GcdF0 => "gcd_f0",
            PitchMethod::Autocorrelation => "autocorrelation",
            PitchMethod::PartialSpacing => "partial_spacing",
        }
    }
}

impl fmt::Display for PitchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PitchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PitchMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown pitch method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchCandidate {
    pub frequency: f64,
    /// In `[0, 1]`.
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchFrame {
    pub time: f64,
    /// Sorted by descending salience.
    pub candidates: Vec<PitchCandidate>,
    pub method: PitchMethod,
}

impl PitchFrame {
    pub fn new(time: f64, mut candidates: Vec<PitchCandidate>, method: PitchMethod) -> Self {
        candidates.retain(|c| c.frequency > 0.0 && c.frequency.is_finite());
        candidates.sort_by(|a, b| {
            b.salience
                .total_cmp(&a.salience)
                .then(a.frequency.total_cmp(&b.frequency))
        });
        Self {
            time,
            candidates,
            method,
        }
    }

    pub fn unvoiced(time: f64, method: PitchMethod) -> Self {
        Self::new(time, Vec::new(), method)
    }

    pub fn single(time: f64, frequency: Option<f64>, salience: f64, method: PitchMethod) -> Self {
        let candidates = frequency
            .map(|frequency| PitchCandidate {
                frequency,
                salience: salience.clamp(0.0, 1.0),
            })
            .into_iter()
            .collect();
        Self::new(time, candidates, method)
    }

    pub fn is_voiced(&self) -> bool {
        !self.candidates.is_empty()
    }

    pub fn top(&self) -> Option<&PitchCandidate> {
        self.candidates.first()
    }
}

/// Per-frame pitch candidates on a uniform frame grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub method: PitchMethod,
    pub hop_seconds: f64,
    pub frames: Vec<PitchFrame>,
}

impl PitchTrack {
    pub fn new(method: PitchMethod, hop_seconds: f64, frames: Vec<PitchFrame>) -> Self {
        Self {
            method,
            hop_seconds,
            frames,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn voicing(&self) -> Vec<bool> {
        self.frames.iter().map(PitchFrame::is_voiced).collect()
    }

    pub fn voiced_count(&self) -> usize {
        self.frames.iter().filter(|f| f.is_voiced()).count()
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcdParams {
    pub tolerance_cents: f64,
    pub min_f0: f64,
}

impl Default for GcdParams {
    fn default() -> Self {
        Self {
            tolerance_cents: DEFAULT_GCD_TOLERANCE_CENTS,
            min_f0: DEFAULT_MIN_F0,
        }
    }
}

/// Least-squares fit of a harmonic series to `freqs`, seeded at `seed`.
///
/// Alternates nearest-integer harmonic assignment with the closed-form
/// minimiser of the summed squared cent deviations,
/// `log2 f = mean(log2(f_i / n_i))`. Returns the fitted fundamental and the
/// largest absolute deviation in cents.
pub fn fit_harmonic_series(freqs: &[f64], seed: f64) -> (f64, f64) {
    let mut f0 = seed;
    let mut numbers: Vec<f64> = Vec::new();
    for _ in 0..8 {
        let next: Vec<f64> = freqs
            .iter()
            .map(|&f| (f / f0).round().max(1.0))
            .collect();
        if next == numbers {
            break;
        }
        numbers = next;
        let mean_log = freqs
            .iter()
            .zip(&numbers)
            .map(|(f, n)| (f / n).log2())
            .sum::<f64>()
            / freqs.len() as f64;
        f0 = mean_log.exp2();
    }
    (f0, max_deviation_cents(freqs, f0))
}

fn max_deviation_cents(freqs: &[f64], f0: f64) -> f64 {
    freqs
        .iter()
        .map(|&f| {
            let n = (f / f0).round().max(1.0);
            cents_between(f, n * f0).abs()
        })
        .fold(0.0, f64::max)
}

/// Fundamental frequency in the greatest-common-divisor sense.
///
/// Candidates are the lowest partial divided by 1, 2, 3, ... down to
/// `min_f0`; each is refined to the least-deviating harmonic series and the
/// first (largest) whose every partial lies within `tolerance_cents` of a
/// harmonic wins.
pub fn f0_gcd(snapshot: &ComplexToneSnapshot, params: &GcdParams) -> Option<f64> {
    let freqs = snapshot.frequencies();
    let lowest = *freqs.first()?;
    let max_divisor = (lowest / params.min_f0).floor() as usize;
    for divisor in 1..=max_divisor.max(1) {
        let seed = lowest / divisor as f64;
        if seed < params.min_f0 {
            break;
        }
        let (f0, max_dev) = fit_harmonic_series(&freqs, seed);
        if f0 >= params.min_f0 && max_dev <= params.tolerance_cents {
            return Some(f0);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcfParams {
    pub min_freq: f64,
    pub max_freq: f64,
    /// Minimum normalised autocorrelation height of a candidate.
    pub threshold: f64,
}

impl Default for AcfParams {
    fn default() -> Self {
        Self {
            min_freq: DEFAULT_ACF_MIN_FREQ,
            max_freq: DEFAULT_ACF_MAX_FREQ,
            threshold: DEFAULT_ACF_THRESHOLD,
        }
    }
}

impl AcfParams {
    /// Shortest frame accepted at `sample_rate`: two periods of `min_freq`.
    pub fn min_frame_len(&self, sample_rate: u32) -> usize {
        (2.0 * sample_rate as f64 / self.min_freq).ceil() as usize
    }
}

/// Biased autocorrelation `r[lag] = sum_n x[n] x[n + lag]` for lags
/// `0..len`, computed through a zero-padded FFT.
pub fn autocorrelation(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    if n == 0 {
        return Vec::new();
    }
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    forward.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    inverse.process(&mut buf);
    buf[..n].iter().map(|c| c.re / size as f64).collect()
}

/// Temporal pitch candidates of one frame.
///
/// The autocorrelation is normalised by its lag-0 value, so it is invariant
/// to gain. The trivial lobe around lag 0 is skipped by starting the search
/// after the first local minimum. Every local maximum above the threshold
/// inside the searched lag range becomes a candidate with its height as
/// salience, the lag refined by parabolic interpolation.
pub fn autocorrelation_pitch(
    frame: &[f64],
    sample_rate: u32,
    time: f64,
    params: &AcfParams,
) -> Result<PitchFrame> {
    let required = params.min_frame_len(sample_rate);
    if frame.len() < required {
        return Err(Error::FrameTooShort {
            len: frame.len(),
            required,
        });
    }
    let r = autocorrelation(frame);
    if r[0] <= 0.0 {
        return Ok(PitchFrame::unvoiced(time, PitchMethod::Autocorrelation));
    }
    let norm: Vec<f64> = r.iter().map(|v| v / r[0]).collect();
    Ok(PitchFrame::new(
        time,
        acf_candidates(&norm, sample_rate, params),
        PitchMethod::Autocorrelation,
    ))
}

fn acf_candidates(norm: &[f64], sample_rate: u32, params: &AcfParams) -> Vec<PitchCandidate> {
    let sr = sample_rate as f64;
    let min_lag = ((sr / params.max_freq).floor() as usize).max(1);
    let max_lag = ((sr / params.min_freq).ceil() as usize).min(norm.len() - 2);

    // end of the lag-0 lobe
    let mut lobe_end = 1;
    while lobe_end + 1 < norm.len() && norm[lobe_end + 1] <= norm[lobe_end] {
        lobe_end += 1;
    }

    let mut candidates = Vec::new();
    for lag in min_lag.max(lobe_end).max(1)..=max_lag {
        let (a, b, c) = (norm[lag - 1], norm[lag], norm[lag + 1]);
        if !(b > a && b >= c) || b < params.threshold {
            continue;
        }
        let denom = a - 2.0 * b + c;
        let (offset, height) = if denom < 0.0 {
            let p = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            (p, b - 0.25 * (a - c) * p)
        } else {
            (0.0, b)
        };
        let frequency = sr / (lag as f64 + offset);
        if frequency < params.min_freq || frequency > params.max_freq {
            continue;
        }
        candidates.push(PitchCandidate {
            frequency,
            salience: height.clamp(0.0, 1.0),
        });
    }
    candidates
}

/// Median spacing between consecutive partials.
pub fn partial_spacing_pitch(snapshot: &ComplexToneSnapshot) -> Option<f64> {
    let freqs = snapshot.frequencies();
    if freqs.len() < 2 {
        return None;
    }
    let mut diffs: Vec<f64> = freqs.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.sort_by(f64::total_cmp);
    let m = diffs.len();
    Some(if m % 2 == 1 {
        diffs[m / 2]
    } else {
        0.5 * (diffs[m / 2 - 1] + diffs[m / 2])
    })
}

/// `1200 log2(f_a / f_b)` of the top candidates on every frame where both
/// tracks are voiced.
pub fn pitch_discrepancy(a: &PitchTrack, b: &PitchTrack) -> Result<Vec<(f64, f64)>> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "{} frames vs {} frames",
            a.len(),
            b.len()
        )));
    }
    let tol = 1e-9 + 1e-6 * a.hop_seconds.max(b.hop_seconds);
    let mut out = Vec::new();
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        if (fa.time - fb.time).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "frame times {} and {}",
                fa.time, fb.time
            )));
        }
        if let (Some(ca), Some(cb)) = (fa.top(), fb.top()) {
            out.push((fa.time, CENTS_PER_OCTAVE * (ca.frequency / cb.frequency).log2()));
        }
    }
    Ok(out)
}

/// Lowest surviving partial track at each frame; salience is that partial's
/// magnitude relative to the loudest partial present in the frame.
pub fn lowest_partial_track(
    tracks: &[PartialTrack],
    frame_times: &[f64],
    hop_seconds: f64,
) -> PitchTrack {
    let n = frame_times.len();
    let mut lowest: Vec<Option<(f64, f64)>> = vec![None; n];
    let mut loudest = vec![0.0f64; n];
    for track in tracks {
        for p in &track.points {
            if p.frame >= n {
                continue;
            }
            loudest[p.frame] = loudest[p.frame].max(p.magnitude);
            match lowest[p.frame] {
                Some((f, _)) if f <= p.frequency => {}
                _ => lowest[p.frame] = Some((p.frequency, p.magnitude)),
            }
        }
    }
    let frames = frame_times
        .iter()
        .enumerate()
        .map(|(i, &time)| match lowest[i] {
            Some((f, m)) => {
                let salience = if loudest[i] > 0.0 { m / loudest[i] } else { 0.0 };
                PitchFrame::single(time, Some(f), salience, PitchMethod::LowestPartial)
            }
            None => PitchFrame::unvoiced(time, PitchMethod::LowestPartial),
        })
        .collect();
    PitchTrack::new(PitchMethod::LowestPartial, hop_seconds, frames)
}

/// Per-frame GCD fundamental.
pub fn gcd_track(
    snapshots: &[ComplexToneSnapshot],
    frame_times: &[f64],
    hop_seconds: f64,
    params: &GcdParams,
) -> PitchTrack {
    let frames = snapshots
        .iter()
        .zip(frame_times)
        .map(|(s, &time)| PitchFrame::single(time, f0_gcd(s, params), 1.0, PitchMethod::GcdF0))
        .collect();
    PitchTrack::new(PitchMethod::GcdF0, hop_seconds, frames)
}

/// Per-frame partial spacing.
pub fn spacing_track(
    snapshots: &[ComplexToneSnapshot],
    frame_times: &[f64],
    hop_seconds: f64,
) -> PitchTrack {
    let frames = snapshots
        .iter()
        .zip(frame_times)
        .map(|(s, &time)| {
            PitchFrame::single(time, partial_spacing_pitch(s), 1.0, PitchMethod::PartialSpacing)
        })
        .collect();
    PitchTrack::new(PitchMethod::PartialSpacing, hop_seconds, frames)
}

/// Autocorrelation pitch of every frame on the given framing grid. Frames
/// are taken unwindowed.
pub fn autocorrelation_track(
    signal: &Signal,
    framing: &FramingParams,
    params: &AcfParams,
) -> Result<PitchTrack> {
    let frames = frame(signal, framing.frame_length, framing.hop, Window::Rectangular)?;
    let sr = signal.sample_rate();
    let out = (0..frames.len())
        .into_par_iter()
        .map(|i| autocorrelation_pitch(&frames.raw(i), sr, frames.center_time(i), params))
        .collect::<Result<Vec<_>>>()?;
    Ok(PitchTrack::new(
        PitchMethod::Autocorrelation,
        framing.hop as f64 / sr as f64,
        out,
    ))
}
