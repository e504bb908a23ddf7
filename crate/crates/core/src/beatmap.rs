//! Interval versus beat-frequency map of two superposed harmonic tones.
//!
//! Each row mixes a tone at `base_f0` with one `interval` semitones away,
//! takes the RMS envelope of the mixture and stores the magnitude spectrum
//! of the mean-removed envelope over the beat-frequency axis. Rows are
//! averaged over a few seeded random phase offsets of the second tone.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cents::CENTS_PER_OCTAVE;
use crate::error::{Error, Result};
use crate::signal::{rms_envelope, Signal, Window};

pub const DEFAULT_BASE_F0: f64 = 220.0;
pub const DEFAULT_PARTIALS: usize = 8;
pub const DEFAULT_STEP_ST: f64 = 0.05;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_DURATION_S: f64 = 1.0;
/// 20 ms: the frame's nulls fall on multiples of 50 Hz, outside the axis.
pub const DEFAULT_RMS_FRAME: usize = 320;
pub const DEFAULT_RMS_HOP: usize = 40;
pub const DEFAULT_MIN_BEAT_HZ: f64 = 2.0;
pub const DEFAULT_MAX_BEAT_HZ: f64 = 50.0;
pub const DEFAULT_PHASE_TRIALS: usize = 4;
pub const DEFAULT_SEED: u64 = 0x5eed;
const ENVELOPE_ZERO_PAD: usize = 4;

pub const MAX_RATIO_TERM: u32 = 8;
pub const RATIO_TOLERANCE_CENTS: f64 = 5.0;
/// Half-width of the neighbourhood a minimum must stand out from.
pub const MINIMUM_WINDOW_ST: f64 = 0.5;
/// The energy must rise by this factor on each side within the window.
pub const MIN_MINIMUM_DEPTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatMapParams {
    pub base_f0: f64,
    pub partials_per_tone: usize,
    pub interval_min_st: f64,
    pub interval_max_st: f64,
    pub step_st: f64,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub rms_frame: usize,
    pub rms_hop: usize,
    pub min_beat_hz: f64,
    pub max_beat_hz: f64,
    pub phase_trials: usize,
    pub seed: u64,
}

impl Default for BeatMapParams {
    fn default() -> Self {
        Self {
            base_f0: DEFAULT_BASE_F0,
            partials_per_tone: DEFAULT_PARTIALS,
            interval_min_st: 0.0,
            interval_max_st: 12.0,
            step_st: DEFAULT_STEP_ST,
            sample_rate: DEFAULT_SAMPLE_RATE,
            duration_s: DEFAULT_DURATION_S,
            rms_frame: DEFAULT_RMS_FRAME,
            rms_hop: DEFAULT_RMS_HOP,
            min_beat_hz: DEFAULT_MIN_BEAT_HZ,
            max_beat_hz: DEFAULT_MAX_BEAT_HZ,
            phase_trials: DEFAULT_PHASE_TRIALS,
            seed: DEFAULT_SEED,
        }
    }
}

impl BeatMapParams {
    /// Grid from `interval_min_st` to `interval_max_st` inclusive; empty
    /// when the range is reversed.
    pub fn intervals(&self) -> Vec<f64> {
        if self.interval_max_st < self.interval_min_st {
            return Vec::new();
        }
        let n = ((self.interval_max_st - self.interval_min_st) / self.step_st + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| {
                let v = self.interval_min_st + k as f64 * self.step_st;
                // keep grid points like 7.0 exact
                (v * 1e9).round() / 1e9
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.base_f0 > 0.0) || self.partials_per_tone == 0 {
            return Err(Error::InvalidParameter("base f0 and partial count must be positive".into()));
        }
        if !(self.step_st > 0.0) {
            return Err(Error::InvalidParameter(format!("step {} must be positive", self.step_st)));
        }
        if self.phase_trials == 0 {
            return Err(Error::InvalidParameter("at least one phase trial".into()));
        }
        if !(self.min_beat_hz >= 0.0 && self.max_beat_hz > self.min_beat_hz) {
            return Err(Error::InvalidParameter("beat axis bounds".into()));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::InvalidParameter("duration must be positive".into()));
        }
        Ok(())
    }

    /// Random phases of the upper tone's partials, one row per trial.
    fn phase_table(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.phase_trials)
            .map(|_| {
                (0..self.partials_per_tone)
                    .map(|_| rng.random_range(0.0..2.0 * PI))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatMap {
    pub params: BeatMapParams,
    pub intervals_st: Vec<f64>,
    pub beat_frequencies_hz: Vec<f64>,
    /// `matrix[i][k]`: modulation magnitude at interval `i`, beat frequency `k`.
    pub matrix: Vec<Vec<f64>>,
}

impl BeatMap {
    /// Sum of squared magnitudes per row.
    pub fn integrated_energy(&self) -> Vec<f64> {
        self.matrix.iter().map(|row| row.iter().map(|m| m * m).sum()).collect()
    }
}

fn beat_axis(params: &BeatMapParams) -> (Vec<usize>, Vec<f64>, usize) {
    let samples = (params.duration_s * params.sample_rate as f64).round() as usize;
    let frames = crate::signal::frame_count(samples, params.rms_frame, params.rms_hop);
    let fft_len = (frames * ENVELOPE_ZERO_PAD).next_power_of_two();
    let env_rate = params.sample_rate as f64 / params.rms_hop as f64;
    let (bins, freqs) = (0..=fft_len / 2)
        .map(|k| (k, k as f64 * env_rate / fft_len as f64))
        .filter(|&(_, f)| f >= params.min_beat_hz && f <= params.max_beat_hz)
        .unzip();
    (bins, freqs, fft_len)
}

/// `1/n` rolloff harmonic tone, `phases[n-1]` added to partial `n`.
fn add_tone(out: &mut [f64], f0: f64, phases: Option<&[f64]>, params: &BeatMapParams) {
    let sr = params.sample_rate as f64;
    for n in 1..=params.partials_per_tone {
        let w = 2.0 * PI * n as f64 * f0 / sr;
        let a = 1.0 / n as f64;
        let ph = phases.map_or(0.0, |p| p[n - 1]);
        for (i, s) in out.iter_mut().enumerate() {
            *s += a * (w * i as f64 + ph).sin();
        }
    }
}

/// Beat spectrum of the mixture of two tones, averaged over `phases`.
/// The tones are ordered by frequency first, so the row does not depend on
/// which one is called the base.
fn beat_row(
    f_a: f64,
    f_b: f64,
    phases: &[Vec<f64>],
    params: &BeatMapParams,
    bins: &[usize],
    fft_len: usize,
) -> Result<Vec<f64>> {
    let (lo, hi) = if f_a <= f_b { (f_a, f_b) } else { (f_b, f_a) };
    let n = (params.duration_s * params.sample_rate as f64).round() as usize;
    let mut lower = vec![0.0; n];
    add_tone(&mut lower, lo, None, params);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_len);
    let mut acc = vec![0.0; bins.len()];
    for trial in phases {
        let mut mix = lower.clone();
        add_tone(&mut mix, hi, Some(trial), params);
        let env = rms_envelope(&Signal::new(mix, params.sample_rate)?, params.rms_frame, params.rms_hop)?;
        let mean = env.iter().sum::<f64>() / env.len() as f64;
        let win = Window::Hann.coefficients(env.len());
        let win_sum: f64 = win.iter().sum();
        let mut buf: Vec<Complex<f64>> = env
            .iter()
            .zip(&win)
            .map(|(e, w)| Complex::new((e - mean) * w, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(fft_len)
            .collect();
        fft.process(&mut buf);
        for (a, &k) in acc.iter_mut().zip(bins) {
            *a += 2.0 * buf[k].norm() / win_sum;
        }
    }
    let trials = phases.len() as f64;
    Ok(acc.into_iter().map(|a| a / trials).collect())
}

fn check_interval_nyquist(intervals: &[f64], params: &BeatMapParams) -> Result<()> {
    let nyquist = params.sample_rate as f64 / 2.0;
    let top = params.partials_per_tone as f64;
    let base_top = top * params.base_f0;
    if base_top >= nyquist {
        if let Some(&first) = intervals.first() {
            return Err(Error::NyquistAtInterval { interval_st: first, frequency_hz: base_top, nyquist });
        }
    }
    for &iv in intervals {
        let f = top * params.base_f0 * (iv / 12.0).exp2();
        if f >= nyquist {
            return Err(Error::NyquistAtInterval { interval_st: iv, frequency_hz: f, nyquist });
        }
    }
    Ok(())
}

pub fn compute_beat_map(params: &BeatMapParams) -> Result<BeatMap> {
    params.validate()?;
    let intervals = params.intervals();
    check_interval_nyquist(&intervals, params)?;
    let (bins, freqs, fft_len) = beat_axis(params);
    let phases = params.phase_table();
    let matrix = intervals
        .par_iter()
        .map(|&iv| {
            let f_b = params.base_f0 * (iv / 12.0).exp2();
            beat_row(params.base_f0, f_b, &phases, params, &bins, fft_len)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BeatMap {
        params: *params,
        intervals_st: intervals,
        beat_frequencies_hz: freqs,
        matrix,
    })
}

/// One row of the map for an arbitrary interval, including off-grid ones.
pub fn beat_spectrum_at(params: &BeatMapParams, interval_st: f64) -> Result<Vec<f64>> {
    params.validate()?;
    check_interval_nyquist(&[interval_st], params)?;
    let (bins, _, fft_len) = beat_axis(params);
    let f_b = params.base_f0 * (interval_st / 12.0).exp2();
    beat_row(params.base_f0, f_b, &params.phase_table(), params, &bins, fft_len)
}

pub fn integrated_modulation_at(params: &BeatMapParams, interval_st: f64) -> Result<f64> {
    Ok(beat_spectrum_at(params, interval_st)?.iter().map(|m| m * m).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub p: u32,
    pub q: u32,
}

impl Ratio {
    pub fn cents(&self) -> f64 {
        CENTS_PER_OCTAVE * (self.p as f64 / self.q as f64).log2()
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.p, self.q)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Reduced ratios `p:q >= 1` with both terms at most [`MAX_RATIO_TERM`].
pub fn small_ratios() -> Vec<Ratio> {
    let mut out: Vec<Ratio> = (1..=MAX_RATIO_TERM)
        .flat_map(|q| (q..=MAX_RATIO_TERM).map(move |p| Ratio { p, q }))
        .filter(|r| gcd(r.p, r.q) == 1)
        .collect();
    out.sort_by(|a, b| a.cents().total_cmp(&b.cents()));
    out
}

/// Nearest small ratio within [`RATIO_TOLERANCE_CENTS`] of an interval.
pub fn label_interval(interval_st: f64) -> Option<Ratio> {
    let cents = interval_st.abs() * 100.0;
    small_ratios()
        .into_iter()
        .map(|r| (r, (r.cents() - cents).abs()))
        .filter(|&(_, d)| d <= RATIO_TOLERANCE_CENTS)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(r, _)| r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatMinimum {
    pub interval_st: f64,
    pub energy: f64,
    pub ratio: Option<Ratio>,
}

/// Local minima of the integrated modulation energy that the energy climbs
/// out of by [`MIN_MINIMUM_DEPTH`] on each side within
/// [`MINIMUM_WINDOW_ST`] (one side at the ends of the range).
pub fn find_beat_minima(map: &BeatMap) -> Vec<BeatMinimum> {
    let e = map.integrated_energy();
    let n = e.len();
    if n < 2 {
        return Vec::new();
    }
    let w = ((MINIMUM_WINDOW_ST / map.params.step_st).round() as usize).max(1);
    let mut out = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || e[i] <= e[i - 1];
        let right_ok = i == n - 1 || e[i] <= e[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let left = (i > 0).then(|| e[i.saturating_sub(w)..i].iter().copied().fold(0.0, f64::max));
        let right = (i + 1 < n).then(|| e[i + 1..(i + 1 + w).min(n)].iter().copied().fold(0.0, f64::max));
        let rise = match (left, right) {
            (Some(l), Some(r)) => l.min(r),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => continue,
        };
        if rise >= MIN_MINIMUM_DEPTH * e[i] && rise > 0.0 {
            out.push(BeatMinimum {
                interval_st: map.intervals_st[i],
                energy: e[i],
                ratio: label_interval(map.intervals_st[i]),
            });
        }
    }
    out
}
