//! Short-time spectra, peak picking and frame-to-frame partial tracking.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::cents::{amplitude_to_db, cents_between, db_to_amplitude};
use crate::error::{Error, Result};
use crate::loudness::{weight_spectrum, LoudnessContour};
use crate::signal::{frame, Signal, Window};

pub const DEFAULT_FRAME_LENGTH: usize = 4096;
pub const DEFAULT_HOP: usize = 1024;
pub const DEFAULT_THRESHOLD_DB: f64 = -60.0;
pub const DEFAULT_MIN_PROMINENCE_DB: f64 = 6.0;
pub const DEFAULT_MAX_JUMP_CENTS: f64 = 50.0;
pub const DEFAULT_MIN_TRACK_FRAMES: usize = 3;

/// Partials closer than this are merged in a snapshot.
pub const DEDUP_CENTS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramingParams {
    pub frame_length: usize,
    pub hop: usize,
    pub window: Window,
    /// Transform size; frames are zero-padded up to it. Never below `frame_length`.
    pub fft_size: usize,
}

impl Default for FramingParams {
    fn default() -> Self {
        Self {
            frame_length: DEFAULT_FRAME_LENGTH,
            hop: DEFAULT_HOP,
            window: Window::Hann,
            fft_size: DEFAULT_FRAME_LENGTH,
        }
    }
}

impl FramingParams {
    pub fn new(frame_length: usize, hop: usize, window: Window) -> Self {
        Self {
            frame_length,
            hop,
            window,
            fft_size: frame_length,
        }
    }

    pub fn with_fft_size(mut self, fft_size: usize) -> Self {
        self.fft_size = fft_size;
        self
    }
}

/// Magnitude spectrogram, one row per frame.
///
/// Magnitudes are scaled by `2 / sum(window)` so that a stationary sinusoid
/// of amplitude `a` shows a peak of height close to `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Vec<Vec<f64>>,
    pub bin_frequencies: Vec<f64>,
    pub frame_times: Vec<f64>,
    pub weighted: bool,
    pub sample_rate: u32,
    pub framing: FramingParams,
    window_sum: f64,
}

impl Spectrogram {
    pub fn frame_count(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn bin_count(&self) -> usize {
        self.bin_frequencies.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate as f64 / self.framing.fft_size as f64
    }

    pub fn hop_seconds(&self) -> f64 {
        self.framing.hop as f64 / self.sample_rate as f64
    }

    /// Energy of frame `index` by Parseval, i.e. the sum of squares of the
    /// windowed frame. Only meaningful for unweighted spectrograms.
    pub fn frame_energy(&self, index: usize) -> f64 {
        let n = self.framing.fft_size;
        let scale = self.window_sum / 2.0;
        let row = &self.magnitudes[index];
        let last = row.len() - 1;
        let sum: f64 = row
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let x = m * scale;
                let e = x * x;
                if k == 0 || (k == last && n % 2 == 0) {
                    e
                } else {
                    2.0 * e
                }
            })
            .sum();
        sum / n as f64
    }

    pub fn total_energy(&self) -> f64 {
        (0..self.frame_count()).map(|i| self.frame_energy(i)).sum()
    }

    /// Mean magnitude of each bin over all frames.
    pub fn mean_spectrum(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.bin_count()];
        for row in &self.magnitudes {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.frame_count().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

struct FrameTransform {
    fft: Arc<dyn Fft<f64>>,
    fft_size: usize,
    scale: f64,
}

impl FrameTransform {
    fn new(fft_size: usize, window_sum: f64) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        Self {
            fft,
            fft_size,
            scale: if window_sum > 0.0 { 2.0 / window_sum } else { 0.0 },
        }
    }

    fn magnitudes(&self, windowed: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = windowed
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.fft_size)
            .collect();
        self.fft.process(&mut buf);
        buf[..self.fft_size / 2 + 1]
            .iter()
            .map(|c| c.norm() * self.scale)
            .collect()
    }
}

pub fn stft(
    signal: &Signal,
    framing: &FramingParams,
    weighting: Option<&LoudnessContour>,
) -> Result<Spectrogram> {
    if framing.fft_size < framing.frame_length {
        return Err(Error::InvalidParameter(format!(
            "fft size {} below frame length {}",
            framing.fft_size, framing.frame_length
        )));
    }
    let frames = frame(signal, framing.frame_length, framing.hop, framing.window)?;
    let window = framing.window.coefficients(framing.frame_length);
    let window_sum: f64 = window.iter().sum();
    let transform = FrameTransform::new(framing.fft_size, window_sum);
    let sr = signal.sample_rate() as f64;
    let bin_frequencies: Vec<f64> = (0..framing.fft_size / 2 + 1)
        .map(|k| k as f64 * sr / framing.fft_size as f64)
        .collect();

    let magnitudes = (0..frames.len())
        .into_par_iter()
        .map(|i| {
            let mags = transform.magnitudes(&frames.windowed_with(i, &window));
            match weighting {
                Some(contour) => weight_spectrum(&mags, &bin_frequencies, contour),
                None => Ok(mags),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Spectrogram {
        magnitudes,
        bin_frequencies,
        frame_times: frames.center_times(),
        weighted: weighting.is_some(),
        sample_rate: signal.sample_rate(),
        framing: *framing,
        window_sum,
    })
}

/// Whole-signal magnitude spectrum with the given window.
pub fn spectrum(signal: &Signal, window: Window) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = signal.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let spec = stft(signal, &FramingParams::new(n, n, window), None)?;
    let Spectrogram {
        mut magnitudes,
        bin_frequencies,
        ..
    } = spec;
    Ok((magnitudes.swap_remove(0), bin_frequencies))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partial {
    pub frequency: f64,
    pub magnitude: f64,
}

/// Partials of one frame, ascending in frequency and at least
/// [`DEDUP_CENTS`] apart. May be empty when a frame holds no peaks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexToneSnapshot {
    partials: Vec<Partial>,
    pub f0_candidate: Option<f64>,
}

impl ComplexToneSnapshot {
    /// Sorts by frequency, drops non-positive frequencies and keeps the
    /// louder of any two partials within one cent.
    pub fn new(partials: impl IntoIterator<Item = Partial>) -> Self {
        let mut sorted: Vec<Partial> = partials
            .into_iter()
            .filter(|p| p.frequency > 0.0 && p.frequency.is_finite())
            .collect();
        sorted.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        let mut out: Vec<Partial> = Vec::with_capacity(sorted.len());
        for p in sorted {
            match out.last_mut() {
                Some(last) if cents_between(p.frequency, last.frequency) < DEDUP_CENTS => {
                    if p.magnitude > last.magnitude {
                        *last = p;
                    }
                }
                _ => out.push(p),
            }
        }
        Self {
            partials: out,
            f0_candidate: None,
        }
    }

    pub fn from_frequencies(freqs: &[f64]) -> Self {
        Self::new(freqs.iter().map(|&frequency| Partial {
            frequency,
            magnitude: 1.0,
        }))
    }

    pub fn with_f0(mut self, f0: Option<f64>) -> Self {
        self.f0_candidate = f0;
        self
    }

    pub fn partials(&self) -> &[Partial] {
        &self.partials
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.partials.iter().map(|p| p.frequency).collect()
    }

    pub fn len(&self) -> usize {
        self.partials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partials.is_empty()
    }

    pub fn lowest(&self) -> Option<&Partial> {
        self.partials.first()
    }

    /// Magnitudes scaled by the contour gain at each partial's frequency.
    /// Picking peaks unweighted and weighting afterwards keeps the contour's
    /// slope across a main lobe from pulling the frequency estimates.
    pub fn weighted(&self, contour: &LoudnessContour) -> Self {
        Self {
            partials: self
                .partials
                .iter()
                .map(|p| Partial {
                    frequency: p.frequency,
                    magnitude: p.magnitude * contour.gain(p.frequency),
                })
                .collect(),
            f0_candidate: self.f0_candidate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    /// Peaks below `frame max + threshold_db` are ignored.
    pub threshold_db: f64,
    pub min_prominence_db: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            threshold_db: DEFAULT_THRESHOLD_DB,
            min_prominence_db: DEFAULT_MIN_PROMINENCE_DB,
        }
    }
}

/// Local maxima of a magnitude spectrum, refined by quadratic interpolation
/// of log magnitude over the three bins around each maximum.
pub fn pick_peaks(
    magnitudes: &[f64],
    bin_frequencies: &[f64],
    params: &PeakParams,
) -> ComplexToneSnapshot {
    let n = magnitudes.len().min(bin_frequencies.len());
    if n < 3 {
        return ComplexToneSnapshot::default();
    }
    let max = magnitudes[..n].iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return ComplexToneSnapshot::default();
    }
    let floor = max * db_to_amplitude(params.threshold_db);
    let db: Vec<f64> = magnitudes[..n].iter().map(|&m| amplitude_to_db(m)).collect();
    let bin_width = bin_frequencies[1] - bin_frequencies[0];

    let mut partials = Vec::new();
    for k in 1..n - 1 {
        let m = magnitudes[k];
        if m < floor || !(m > magnitudes[k - 1] && m >= magnitudes[k + 1]) {
            continue;
        }
        if prominence_db(&db, k) < params.min_prominence_db {
            continue;
        }
        let (alpha, beta, gamma) = (db[k - 1], db[k], db[k + 1]);
        let denom = alpha - 2.0 * beta + gamma;
        let offset = if denom < 0.0 {
            (0.5 * (alpha - gamma) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let peak_db = beta - 0.25 * (alpha - gamma) * offset;
        partials.push(Partial {
            frequency: bin_frequencies[k] + offset * bin_width,
            magnitude: db_to_amplitude(peak_db),
        });
    }
    ComplexToneSnapshot::new(partials)
}

/// Topographic prominence: height above the higher of the two lowest points
/// reached before climbing to a higher sample (or the spectrum edge).
fn prominence_db(db: &[f64], k: usize) -> f64 {
    let peak = db[k];
    let mut left_min = peak;
    for &v in db[..k].iter().rev() {
        if v > peak {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = peak;
    for &v in &db[k + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

/// Peaks of every frame of a spectrogram.
pub fn frame_snapshots(spec: &Spectrogram, params: &PeakParams) -> Vec<ComplexToneSnapshot> {
    spec.magnitudes
        .par_iter()
        .map(|row| pick_peaks(row, &spec.bin_frequencies, params))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: usize,
    pub time: f64,
    pub frequency: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialTrack {
    /// Ordinal by mean frequency, 1 = lowest.
    pub index: usize,
    pub points: Vec<TrackPoint>,
}

impl PartialTrack {
    pub fn birth_frame(&self) -> usize {
        self.points[0].frame
    }

    /// Last frame holding a point (inclusive).
    pub fn death_frame(&self) -> usize {
        self.points[self.points.len() - 1].frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean_frequency(&self) -> f64 {
        self.points.iter().map(|p| p.frequency).sum::<f64>() / self.points.len() as f64
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.points.iter().map(|p| p.magnitude).sum::<f64>() / self.points.len() as f64
    }

    pub fn point_at(&self, frame: usize) -> Option<&TrackPoint> {
        let first = self.birth_frame();
        if frame < first || frame > self.death_frame() {
            return None;
        }
        self.points.get(frame - first).filter(|p| p.frame == frame)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingParams {
    pub max_jump_cents: f64,
    /// Tracks with fewer points are discarded.
    pub min_track_frames: usize,
}

impl Default for TrackingParams {
    fn default() -> Self {
        Self {
            max_jump_cents: DEFAULT_MAX_JUMP_CENTS,
            min_track_frames: DEFAULT_MIN_TRACK_FRAMES,
        }
    }
}

/// Greedy nearest-in-cents linking of per-frame peaks into tracks.
pub fn track_partials(
    spec: &Spectrogram,
    peaks: &PeakParams,
    tracking: &TrackingParams,
) -> Vec<PartialTrack> {
    let snapshots = frame_snapshots(spec, peaks);
    link_snapshots(&snapshots, &spec.frame_times, tracking)
}

/// Linking step of [`track_partials`] over precomputed snapshots.
pub fn link_snapshots(
    snapshots: &[ComplexToneSnapshot],
    frame_times: &[f64],
    tracking: &TrackingParams,
) -> Vec<PartialTrack> {
    let mut finished: Vec<Vec<TrackPoint>> = Vec::new();
    let mut active: Vec<Vec<TrackPoint>> = Vec::new();

    for (frame, snapshot) in snapshots.iter().enumerate() {
        let time = frame_times[frame];
        let peaks = snapshot.partials();

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (t, track) in active.iter().enumerate() {
            let last = track[track.len() - 1].frequency;
            for (p, peak) in peaks.iter().enumerate() {
                let jump = cents_between(peak.frequency, last).abs();
                if jump <= tracking.max_jump_cents {
                    pairs.push((jump, t, p));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_taken = vec![false; active.len()];
        let mut peak_taken = vec![false; peaks.len()];
        let mut continued: Vec<Option<usize>> = vec![None; active.len()];
        for &(_, t, p) in &pairs {
            if !track_taken[t] && !peak_taken[p] {
                track_taken[t] = true;
                peak_taken[p] = true;
                continued[t] = Some(p);
            }
        }

        let mut next_active = Vec::with_capacity(peaks.len());
        for (mut track, link) in active.into_iter().zip(continued) {
            match link {
                Some(p) => {
                    track.push(TrackPoint {
                        frame,
                        time,
                        frequency: peaks[p].frequency,
                        magnitude: peaks[p].magnitude,
                    });
                    next_active.push(track);
                }
                None => finished.push(track),
            }
        }
        for (p, peak) in peaks.iter().enumerate() {
            if !peak_taken[p] {
                next_active.push(vec![TrackPoint {
                    frame,
                    time,
                    frequency: peak.frequency,
                    magnitude: peak.magnitude,
                }]);
            }
        }
        active = next_active;
    }
    finished.extend(active);

    let mut tracks: Vec<PartialTrack> = finished
        .into_iter()
        .filter(|points| points.len() >= tracking.min_track_frames.max(1))
        .map(|points| PartialTrack { index: 0, points })
        .collect();
    tracks.sort_by(|a, b| {
        a.mean_frequency()
            .total_cmp(&b.mean_frequency())
            .then(a.birth_frame().cmp(&b.birth_frame()))
    });
    for (i, t) in tracks.iter_mut().enumerate() {
        t.index = i + 1;
    }
    tracks
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(partials: &[(f64, f64)], secs: f64, sr: u32) -> Signal {
        let n = (secs * sr as f64) as usize;
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / sr as f64;
                partials
                    .iter()
                    .map(|&(f, a)| a * (2.0 * PI * f * t).sin())
                    .sum()
            })
            .collect();
        Signal::new(s, sr).unwrap()
    }

    #[test]
    fn sine_ridge() {
        let s = tone(&[(440.0, 0.5)], 1.0, 48_000);
        let spec = stft(&s, &FramingParams::default(), None).unwrap();
        let bw = spec.bin_width();
        for row in &spec.magnitudes[..spec.frame_count() - 1] {
            let (k, _) = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            assert!((spec.bin_frequencies[k] - 440.0).abs() <= bw);
        }
    }

    #[test]
    fn silence_is_zero() {
        let s = Signal::silence(10_000, 48_000).unwrap();
        let spec = stft(&s, &FramingParams::default(), None).unwrap();
        assert!(spec.magnitudes.iter().flatten().all(|&m| m == 0.0));
        let tracks = track_partials(&spec, &PeakParams::default(), &TrackingParams::default());
        assert!(tracks.is_empty());
    }

    #[test]
    fn two_ridges_equal_height() {
        let s = tone(&[(440.0, 0.4), (660.0, 0.4)], 1.0, 48_000);
        let spec = stft(&s, &FramingParams::default(), None).unwrap();
        let snap = pick_peaks(&spec.magnitudes[5], &spec.bin_frequencies, &PeakParams::default());
        assert_eq!(snap.len(), 2);
        let (a, b) = (snap.partials()[0].magnitude, snap.partials()[1].magnitude);
        assert!((a / b - 1.0).abs() < 0.05, "{a} {b}");
        assert!((a - 0.4).abs() < 0.02, "{a}");
    }

    #[test]
    fn parseval_rectangular() {
        let s = tone(&[(123.4, 0.3), (1777.0, 0.2)], 0.5, 16_000);
        let framing = FramingParams::new(1000, 500, Window::Rectangular);
        let spec = stft(&s, &framing, None).unwrap();
        let frames = frame(&s, 1000, 500, Window::Rectangular).unwrap();
        let time_energy: f64 = frames
            .iter_raw()
            .map(|f| f.iter().map(|x| x * x).sum::<f64>())
            .sum();
        let spec_energy = spec.total_energy();
        assert!((spec_energy / time_energy - 1.0).abs() < 0.01);
    }

    #[test]
    fn peak_within_three_cents() {
        let s = tone(&[(440.0, 0.8)], 1.0, 48_000);
        let spec = stft(&s, &FramingParams::default(), None).unwrap();
        let snap = pick_peaks(&spec.magnitudes[3], &spec.bin_frequencies, &PeakParams::default());
        assert_eq!(snap.len(), 1);
        assert!(cents_between(snap.partials()[0].frequency, 440.0).abs() < 3.0);
    }

    #[test]
    fn harmonic_peaks() {
        let partials: Vec<(f64, f64)> = (1..=10).map(|n| (110.0 * n as f64, 0.08)).collect();
        let s = tone(&partials, 1.0, 48_000);
        let spec = stft(&s, &FramingParams::default(), None).unwrap();
        let snap = pick_peaks(&spec.magnitudes[4], &spec.bin_frequencies, &PeakParams::default());
        assert_eq!(snap.len(), 10);
        for (n, p) in snap.partials().iter().enumerate() {
            let target = 110.0 * (n + 1) as f64;
            assert!(cents_between(p.frequency, target).abs() < 3.0, "{p:?}");
        }
    }

    #[test]
    fn noise_peaks_respect_threshold() {
        use rand::{Rng, SeedableRng};
        for seed in 0..4 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<f64> = (0..8192).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = Signal::new(s, 48_000).unwrap();
            let spec = stft(&s, &FramingParams::default(), None).unwrap();
            let row = &spec.magnitudes[1];
            let max = row.iter().copied().fold(0.0, f64::max);
            let params = PeakParams {
                threshold_db: -6.0,
                min_prominence_db: 0.0,
            };
            let snap = pick_peaks(row, &spec.bin_frequencies, &params);
            for p in snap.partials() {
                // the refined magnitude is at least the bin magnitude
                assert!(p.magnitude >= max * db_to_amplitude(-6.0) * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn refinement_stays_within_a_bin() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let freqs: Vec<f64> = (0..256).map(|k| k as f64 * 10.0).collect();
        for _ in 0..200 {
            let mags: Vec<f64> = (0..256).map(|_| rng.random_range(0.0..1.0)).collect();
            let snap = pick_peaks(&mags, &freqs, &PeakParams { threshold_db: -40.0, min_prominence_db: 0.0 });
            for p in snap.partials() {
                let nearest = (p.frequency / 10.0).round() * 10.0;
                assert!((p.frequency - nearest).abs() <= 5.0 + 1e-9);
            }
        }
    }

    #[test]
    fn stable_harmonic_tone_gives_ten_tracks() {
        let partials: Vec<(f64, f64)> = (1..=10).map(|n| (110.0 * n as f64, 0.08)).collect();
        let s = tone(&partials, 1.0, 48_000);
        let spec = stft(&s, &FramingParams::default(), None).unwrap();
        let tracks = track_partials(&spec, &PeakParams::default(), &TrackingParams::default());
        assert_eq!(tracks.len(), 10);
        for (i, t) in tracks.iter().enumerate() {
            assert_eq!(t.index, i + 1);
            assert!(t.len() as f64 >= 0.95 * spec.frame_count() as f64);
        }
    }

    #[test]
    fn glide_gives_one_track() {
        let sr = 48_000;
        let (f_start, f_end) = (440.0f64, 466.0f64);
        let n = sr as usize;
        let mut phase = 0.0f64;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / sr as f64;
                let f = f_start + (f_end - f_start) * t;
                let s = 0.5 * phase.sin();
                phase += 2.0 * PI * f / sr as f64;
                s
            })
            .collect();
        let s = Signal::new(samples, sr).unwrap();
        let spec = stft(&s, &FramingParams::default(), None).unwrap();
        let tracks = track_partials(&spec, &PeakParams::default(), &TrackingParams::default());
        assert_eq!(tracks.len(), 1);
        let t = &tracks[0];
        let glide_at = |time: f64| f_start + (f_end - f_start) * time;
        // the final frame is mostly padding; compare the last full frame
        let first = t.points[0];
        let last = t
            .points
            .iter()
            .rev()
            .find(|p| p.time + 2048.0 / sr as f64 <= 1.0)
            .unwrap();
        assert!(cents_between(first.frequency, glide_at(first.time)).abs() < 5.0);
        assert!(cents_between(last.frequency, glide_at(last.time)).abs() < 5.0);
    }

    #[test]
    fn tracks_partition_peaks() {
        let partials: Vec<(f64, f64)> = (1..=6).map(|n| (200.0 * n as f64, 0.1)).collect();
        let s = tone(&partials, 0.5, 48_000);
        let spec = stft(&s, &FramingParams::default(), None).unwrap();
        let tracks = track_partials(&spec, &PeakParams::default(), &TrackingParams { max_jump_cents: 50.0, min_track_frames: 1 });
        let mut seen = std::collections::HashSet::new();
        for t in &tracks {
            for p in &t.points {
                assert!(seen.insert((p.frame, p.frequency.to_bits())));
            }
        }
        let total: usize = frame_snapshots(&spec, &PeakParams::default()).iter().map(|s| s.len()).sum();
        assert_eq!(seen.len(), total);
    }

    #[test]
    fn snapshot_dedups_within_a_cent() {
        let s = ComplexToneSnapshot::new([
            Partial { frequency: 440.0, magnitude: 0.1 },
            Partial { frequency: 440.1, magnitude: 0.5 },
            Partial { frequency: 220.0, magnitude: 0.2 },
            Partial { frequency: -1.0, magnitude: 0.2 },
        ]);
        assert_eq!(s.frequencies(), vec![220.0, 440.1]);
    }
}
