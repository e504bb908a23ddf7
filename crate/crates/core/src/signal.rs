//! Mono audio container and frame decomposition.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampled mono audio. Samples are finite; the nominal range is `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    /// Equal-weight mixdown of interleaved multichannel samples.
    pub fn from_interleaved(interleaved: &[f64], channels: usize, sample_rate: u32) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter("zero channels".into()));
        }
        let samples = interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect();
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Concatenates `other` after `self`.
    pub fn concat(&self, other: &Signal) -> Result<Self> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::SignalMismatch(format!(
                "sample rates {} and {}",
                self.sample_rate, other.sample_rate
            )));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Ok(Self {
            samples,
            sample_rate: self.sample_rate,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    /// Periodic window coefficients of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(Error::InvalidParameter(format!("unknown window {other:?}"))),
        }
    }
}

/// Number of frames needed to cover `len` samples; the final frame may overhang.
pub fn frame_count(len: usize, frame_length: usize, hop: usize) -> usize {
    if len <= frame_length {
        1
    } else {
        (len - frame_length).div_ceil(hop) + 1
    }
}

/// Ordered, possibly overlapping views into a signal. The last frame is
/// zero-padded when it runs past the end.
#[derive(Debug, Clone)]
pub struct FrameSequence<'a> {
    signal: &'a Signal,
    frame_length: usize,
    hop: usize,
    window: Window,
    count: usize,
}

pub fn frame(
    signal: &Signal,
    frame_length: usize,
    hop: usize,
    window: Window,
) -> Result<FrameSequence<'_>> {
    if signal.is_empty() {
        return Err(Error::EmptyInput);
    }
    if frame_length == 0 {
        return Err(Error::InvalidFrameLength(frame_length));
    }
    if hop == 0 || hop > frame_length {
        return Err(Error::InvalidHop { hop, frame_length });
    }
    Ok(FrameSequence {
        signal,
        frame_length,
        hop,
        window,
        count: frame_count(signal.len(), frame_length, hop),
    })
}

impl<'a> FrameSequence<'a> {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn signal(&self) -> &'a Signal {
        self.signal
    }

    pub fn start(&self, index: usize) -> usize {
        index * self.hop
    }

    /// Time of the frame centre in seconds.
    pub fn center_time(&self, index: usize) -> f64 {
        (self.start(index) as f64 + self.frame_length as f64 / 2.0)
            / self.signal.sample_rate() as f64
    }

    pub fn center_times(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.center_time(i)).collect()
    }

    /// Signal samples (not padding) inside frame `index`.
    pub fn valid_len(&self, index: usize) -> usize {
        let start = self.start(index);
        self.signal.len().saturating_sub(start).min(self.frame_length)
    }

    /// Raw samples of frame `index`, zero-padded to the frame length.
    pub fn raw(&self, index: usize) -> Vec<f64> {
        assert!(index < self.count, "frame index out of range");
        let start = self.start(index);
        let valid = self.valid_len(index);
        let mut out = vec![0.0; self.frame_length];
        out[..valid].copy_from_slice(&self.signal.samples()[start..start + valid]);
        out
    }

    /// Frame `index` multiplied by the sequence's window.
    pub fn windowed(&self, index: usize) -> Vec<f64> {
        self.windowed_with(index, &self.window.coefficients(self.frame_length))
    }

    /// Like [`windowed`](Self::windowed) with precomputed coefficients.
    pub fn windowed_with(&self, index: usize, coefficients: &[f64]) -> Vec<f64> {
        let mut frame = self.raw(index);
        for (s, w) in frame.iter_mut().zip(coefficients) {
            *s *= w;
        }
        frame
    }

    pub fn iter_raw(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.count).map(move |i| self.raw(i))
    }
}

/// Root-mean-square of each rectangular frame. Padding samples of the final
/// frame are excluded from its mean.
pub fn rms_envelope(signal: &Signal, frame_length: usize, hop: usize) -> Result<Vec<f64>> {
    let frames = frame(signal, frame_length, hop, Window::Rectangular)?;
    let samples = signal.samples();
    Ok((0..frames.len())
        .map(|i| {
            let start = frames.start(i);
            let valid = frames.valid_len(i);
            let energy: f64 = samples[start..start + valid].iter().map(|s| s * s).sum();
            (energy / valid as f64).sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine(freq: f64, amp: f64, len: usize, sr: u32) -> Signal {
        let s = (0..len)
            .map(|n| amp * (2.0 * PI * freq * n as f64 / sr as f64).sin())
            .collect();
        Signal::new(s, sr).unwrap()
    }

    #[test]
    fn rejects_bad_signals() {
        assert!(matches!(
            Signal::new(vec![0.0], 0),
            Err(Error::InvalidSampleRate(0))
        ));
        assert!(matches!(
            Signal::new(vec![0.0, f64::NAN], 8000),
            Err(Error::NonFiniteSample(1))
        ));
    }

    #[test]
    fn frame_counts() {
        let s = Signal::silence(1000, 8000).unwrap();
        assert_eq!(frame(&s, 400, 200, Window::Hann).unwrap().len(), 4);
        assert_eq!(frame(&s, 1000, 300, Window::Hann).unwrap().len(), 1);
        assert_eq!(frame(&s, 1000, 1000, Window::Hann).unwrap().len(), 1);

        // (48000 - 4096) / 1024 = 42.875, rounded up, plus the first frame
        let s = Signal::silence(48_000, 48_000).unwrap();
        assert_eq!(frame(&s, 4096, 1024, Window::Hann).unwrap().len(), 44);
    }

    #[test]
    fn frame_errors() {
        let empty = Signal::new(vec![], 8000).unwrap();
        assert!(matches!(
            frame(&empty, 4, 2, Window::Hann),
            Err(Error::EmptyInput)
        ));
        let s = Signal::silence(10, 8000).unwrap();
        let err = frame(&s, 4, 0, Window::Hann).unwrap_err();
        assert!(err.to_string().starts_with("invalid hop"));
        assert!(frame(&s, 4, 5, Window::Hann).is_err());
    }

    #[test]
    fn last_frame_is_zero_padded() {
        let s = Signal::new((1..=10).map(f64::from).collect(), 8000).unwrap();
        let frames = frame(&s, 4, 3, Window::Rectangular).unwrap();
        assert_eq!(frames.len(), 3);
        assert_eq!(frames.raw(2), vec![7.0, 8.0, 9.0, 10.0]);
        let frames = frame(&s, 4, 4, Window::Rectangular).unwrap();
        assert_eq!(frames.len(), 3);
        assert_eq!(frames.raw(2), vec![9.0, 10.0, 0.0, 0.0]);
    }

    #[test]
    fn rms_of_constant() {
        let s = Signal::new(vec![-0.25; 1003], 8000).unwrap();
        for v in rms_envelope(&s, 100, 30).unwrap() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn rms_of_sine() {
        let s = sine(440.0, 1.0, 48_000, 48_000);
        for v in rms_envelope(&s, 4800, 2400).unwrap() {
            assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.01, "{v}");
        }
    }

    #[test]
    fn rms_beats_at_difference_frequency() {
        let sr = 48_000;
        let f1 = 440.0;
        let f2 = 440.0 * 2f64.powf(1.0 / 12.0);
        let expected_beat = f2 - f1; // 26.16 Hz
        let a = sine(f1, 0.5, sr as usize * 2, sr);
        let b = sine(f2, 0.5, sr as usize * 2, sr);
        let mix: Vec<f64> = a.samples().iter().zip(b.samples()).map(|(x, y)| x + y).collect();
        let mix = Signal::new(mix, sr).unwrap();
        let hop = 48; // 1 kHz envelope rate
        let env = rms_envelope(&mix, 480, hop).unwrap();
        // count upward mean crossings to measure the modulation period
        let mean = env.iter().sum::<f64>() / env.len() as f64;
        let crossings: Vec<usize> = env
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] < mean && w[1] >= mean)
            .map(|(i, _)| i)
            .collect();
        let periods = (crossings.len() - 1) as f64;
        let span = (crossings[crossings.len() - 1] - crossings[0]) as f64 * hop as f64 / sr as f64;
        let measured = periods / span;
        assert!(
            (measured - expected_beat).abs() / expected_beat < 0.02,
            "measured {measured} expected {expected_beat}"
        );
    }

    proptest! {
        #[test]
        fn frame_count_non_increasing_in_hop(len in 1usize..5000, frame_length in 1usize..600, hop in 1usize..600) {
            let hop = hop.min(frame_length);
            let s = Signal::silence(len, 8000).unwrap();
            let a = frame(&s, frame_length, hop, Window::Hann).unwrap().len();
            if hop < frame_length {
                let b = frame(&s, frame_length, hop + 1, Window::Hann).unwrap().len();
                prop_assert!(b <= a);
            }
        }

        #[test]
        fn rms_positively_homogeneous(
            samples in proptest::collection::vec(-1.0f64..1.0, 50..400),
            gain in -8.0f64..8.0,
        ) {
            let s = Signal::new(samples, 8000).unwrap();
            let base = rms_envelope(&s, 32, 16).unwrap();
            let scaled = rms_envelope(&s.scaled(gain), 32, 16).unwrap();
            for (b, sc) in base.iter().zip(&scaled) {
                let expected = gain.abs() * b;
                prop_assert!((sc - expected).abs() <= 1e-9 * expected.abs().max(1e-300));
            }
        }

        #[test]
        fn windowing_never_adds_energy(samples in proptest::collection::vec(-1.0f64..1.0, 64..256)) {
            let s = Signal::new(samples, 8000).unwrap();
            let frames = frame(&s, 64, 32, Window::Hann).unwrap();
            for i in 0..frames.len() {
                let raw: f64 = frames.raw(i).iter().map(|x| x * x).sum();
                let win: f64 = frames.windowed(i).iter().map(|x| x * x).sum();
                prop_assert!(win <= raw + 1e-12);
            }
        }
    }
}
