//! Deterministic generators for complex tones, 808-style bass and the
//! processing chain around them (waveshaping, ring modulation, unison,
//! pitch contours).
//!
//! Oscillators start at phase zero. Every generator output is scaled down to
//! a peak of at most [`PEAK_LIMIT`] if it would exceed it; the waveshaper and
//! ring modulator are processors and leave levels alone.

mod bass808;
mod effects;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cents::{db_to_amplitude, transpose};
use crate::error::{Error, Result};
use crate::signal::Signal;

pub use bass808::{synth_808, Bass808Patch, BoostPattern, BoostTable};
pub use effects::{
    glide, ring_modulate, unison, waveshape, GlideKind, PitchContour, WaveshaperSpec,
};

pub const PEAK_LIMIT: f64 = 1.0 - 1e-6;

/// Level in dB, relative to the fundamental, of harmonic `n` in the bass
/// recipe shared by the 808 model and the boosted-partial analogues:
/// `-12 - 28 log10(n)` for `n >= 2`. Unboosted upper partials then stay
/// below the fundamental after 50-phon weighting for fundamentals between
/// roughly 35 and 150 Hz, while a 20 dB boost lifts them above it.
pub fn bass_partial_level_db(n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        -12.0 - 28.0 * (n as f64).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialFrequency {
    /// Multiple of the tone's f0 (may be fractional).
    Harmonic(f64),
    /// Absolute frequency in Hz; unaffected by f0 but follows transposition.
    FrequencyHz(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSpec {
    #[serde(flatten)]
    pub frequency: PartialFrequency,
    pub amplitude: f64,
    #[serde(default)]
    pub cent_offset: f64,
}

impl PartialSpec {
    pub fn harmonic(n: f64, amplitude: f64) -> Self {
        Self {
            frequency: PartialFrequency::Harmonic(n),
            amplitude,
            cent_offset: 0.0,
        }
    }

    pub fn exact(frequency_hz: f64, amplitude: f64) -> Self {
        Self {
            frequency: PartialFrequency::FrequencyHz(frequency_hz),
            amplitude,
            cent_offset: 0.0,
        }
    }

    pub fn with_cent_offset(mut self, cents: f64) -> Self {
        self.cent_offset = cents;
        self
    }

    pub fn frequency(&self, f0: f64) -> f64 {
        let base = match self.frequency {
            PartialFrequency::Harmonic(n) => n * f0,
            PartialFrequency::FrequencyHz(f) => f,
        };
        transpose(base, self.cent_offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Envelope {
    #[default]
    Constant,
    ExponentialDecay { time_constant_s: f64 },
}

impl Envelope {
    pub fn gain(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant => 1.0,
            Envelope::ExponentialDecay { time_constant_s } => (-t / time_constant_s).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexToneSpec {
    pub f0: f64,
    pub partials: Vec<PartialSpec>,
    pub duration_s: f64,
    #[serde(default)]
    pub envelope: Envelope,
}

impl ComplexToneSpec {
    /// Harmonics `1..=amplitudes.len()` of `f0`.
    pub fn harmonic(f0: f64, amplitudes: &[f64], duration_s: f64) -> Self {
        Self {
            f0,
            partials: amplitudes
                .iter()
                .enumerate()
                .map(|(i, &a)| PartialSpec::harmonic((i + 1) as f64, a))
                .collect(),
            duration_s,
            envelope: Envelope::Constant,
        }
    }

    pub fn sine(freq: f64, amplitude: f64, duration_s: f64) -> Self {
        Self::harmonic(freq, &[amplitude], duration_s)
    }

    /// Bass tone of `n_partials` harmonics following
    /// [`bass_partial_level_db`], with `boosts` as (harmonic, dB) pairs
    /// added on top. The fundamental has amplitude 0.5 before boosting.
    pub fn bass_analogue(f0: f64, n_partials: usize, boosts: &[(usize, f64)], duration_s: f64) -> Self {
        let amplitudes: Vec<f64> = (1..=n_partials)
            .map(|n| {
                let boost: f64 = boosts.iter().filter(|b| b.0 == n).map(|b| b.1).sum();
                0.5 * db_to_amplitude(bass_partial_level_db(n) + boost)
            })
            .collect();
        Self::harmonic(f0, &amplitudes, duration_s)
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn partial_frequencies(&self) -> Vec<f64> {
        self.partials.iter().map(|p| p.frequency(self.f0)).collect()
    }

    /// Every partial shifted by `cents`.
    pub fn transposed(&self, cents: f64) -> Self {
        let mut out = self.clone();
        out.f0 = transpose(self.f0, cents);
        for p in &mut out.partials {
            if let PartialFrequency::FrequencyHz(f) = p.frequency {
                p.frequency = PartialFrequency::FrequencyHz(transpose(f, cents));
            }
        }
        out
    }

    /// Drops partials below `cutoff_hz` (an ideal high-pass).
    pub fn high_passed(&self, cutoff_hz: f64) -> Self {
        let mut out = self.clone();
        out.partials.retain(|p| p.frequency(self.f0) >= cutoff_hz);
        out
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::InvalidParameter(format!("f0 {} must be positive", self.f0)));
        }
        if self.partials.is_empty() {
            return Err(Error::InvalidParameter("tone has no partials".into()));
        }
        if let Some(p) = self.partials.iter().find(|p| !(p.amplitude >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "negative amplitude {}",
                p.amplitude
            )));
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "duration {} must be non-negative",
                self.duration_s
            )));
        }
        if let Envelope::ExponentialDecay { time_constant_s } = self.envelope {
            if !(time_constant_s > 0.0) {
                return Err(Error::InvalidParameter(
                    "decay time constant must be positive".into(),
                ));
            }
        }
        check_nyquist(&self.partial_frequencies(), sample_rate)
    }

    pub fn sample_count(&self, sample_rate: u32) -> usize {
        (self.duration_s * sample_rate as f64).round() as usize
    }
}

pub(crate) fn check_nyquist(freqs: &[f64], sample_rate: u32) -> Result<()> {
    let nyquist = sample_rate as f64 / 2.0;
    let offending: Vec<f64> = freqs.iter().copied().filter(|&f| f >= nyquist).collect();
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::AboveNyquist { nyquist, offending })
    }
}

/// Scales `samples` down so the peak does not exceed [`PEAK_LIMIT`].
pub(crate) fn limit_peak(mut samples: Vec<f64>) -> Vec<f64> {
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > PEAK_LIMIT {
        let g = PEAK_LIMIT / peak;
        samples.iter_mut().for_each(|s| *s *= g);
    }
    samples
}

/// Sums the tone's partials over a time axis warped by `warp`, where
/// `warp[i]` is the elapsed "playback time" at sample `i`. An unwarped
/// render passes `None`.
pub(crate) fn render_tone(spec: &ComplexToneSpec, sample_rate: u32, warp: Option<&[f64]>) -> Vec<f64> {
    let n = spec.sample_count(sample_rate);
    let sr = sample_rate as f64;
    let freqs = spec.partial_frequencies();
    let active: Vec<(f64, f64)> = freqs
        .iter()
        .zip(&spec.partials)
        .filter(|(_, p)| p.amplitude > 0.0)
        .map(|(&f, p)| (2.0 * PI * f, p.amplitude))
        .collect();
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let tau = warp.map_or(t, |w| w[i]);
            let s: f64 = active.iter().map(|&(w, a)| a * (w * tau).sin()).sum();
            s * spec.envelope.gain(t)
        })
        .collect()
}

pub fn synth_complex_tone(spec: &ComplexToneSpec, sample_rate: u32) -> Result<Signal> {
    spec.validate(sample_rate)?;
    Signal::new(limit_peak(render_tone(spec, sample_rate, None)), sample_rate)
}

/// A renderable synthesis document, as read by the `synth` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthDocument {
    ComplexTone(ComplexToneSpec),
    Bass808(Bass808Patch),
    Unison {
        tone: ComplexToneSpec,
        voices: usize,
        detune_spread_cents: f64,
    },
    Glide {
        tone: ComplexToneSpec,
        contour: PitchContour,
    },
    Waveshape {
        source: Box<SynthDocument>,
        shaper: WaveshaperSpec,
    },
    RingModulate {
        a: Box<SynthDocument>,
        b: Box<SynthDocument>,
    },
    Concat {
        parts: Vec<SynthDocument>,
    },
}

impl SynthDocument {
    pub fn render(&self, sample_rate: u32) -> Result<Signal> {
        match self {
            SynthDocument::ComplexTone(spec) => synth_complex_tone(spec, sample_rate),
            SynthDocument::Bass808(patch) => synth_808(patch, sample_rate),
            SynthDocument::Unison {
                tone,
                voices,
                detune_spread_cents,
            } => unison(tone, *voices, *detune_spread_cents, sample_rate),
            SynthDocument::Glide { tone, contour } => glide(tone, contour, sample_rate),
            SynthDocument::Waveshape { source, shaper } => {
                waveshape(&source.render(sample_rate)?, shaper)
            }
            SynthDocument::RingModulate { a, b } => {
                ring_modulate(&a.render(sample_rate)?, &b.render(sample_rate)?)
            }
            SynthDocument::Concat { parts } => {
                let mut out = Signal::new(Vec::new(), sample_rate)?;
                for part in parts {
                    out = out.concat(&part.render(sample_rate)?)?;
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{stft, track_partials, FramingParams, PeakParams, TrackingParams};

    #[test]
    fn zero_amplitude_is_silence() {
        let spec = ComplexToneSpec::harmonic(110.0, &[0.0, 0.0, 0.0], 0.2);
        let s = synth_complex_tone(&spec, 48_000).unwrap();
        assert_eq!(s.len(), 9600);
        assert!(s.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn phase_zero_onset() {
        let s = synth_complex_tone(&ComplexToneSpec::sine(440.0, 0.5, 0.1), 48_000).unwrap();
        assert_eq!(s.samples()[0], 0.0);
    }

    #[test]
    fn nyquist_violation_lists_partials() {
        let spec = ComplexToneSpec::harmonic(5000.0, &[1.0, 1.0, 1.0], 0.1);
        match synth_complex_tone(&spec, 16_000) {
            Err(Error::AboveNyquist { offending, .. }) => assert_eq!(offending, vec![10_000.0, 15_000.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_specs() {
        let mut spec = ComplexToneSpec::sine(100.0, 1.0, 0.1);
        spec.partials.clear();
        assert!(synth_complex_tone(&spec, 8000).is_err());
        let spec = ComplexToneSpec::harmonic(100.0, &[1.0, -0.5], 0.1);
        assert!(synth_complex_tone(&spec, 8000).is_err());
    }

    #[test]
    fn deterministic_and_limited() {
        let spec = ComplexToneSpec::harmonic(55.0, &[1.0; 20], 0.5);
        let a = synth_complex_tone(&spec, 44_100).unwrap();
        let b = synth_complex_tone(&spec, 44_100).unwrap();
        assert_eq!(a, b);
        assert!(a.peak() <= PEAK_LIMIT);
    }

    #[test]
    fn harmonic_round_trip() {
        let spec = ComplexToneSpec::harmonic(110.0, &[0.08; 10], 1.0);
        let s = synth_complex_tone(&spec, 48_000).unwrap();
        let spec_fr = stft(&s, &FramingParams::default(), None).unwrap();
        let tracks = track_partials(&spec_fr, &PeakParams::default(), &TrackingParams::default());
        assert_eq!(tracks.len(), 10);
        let n = spec_fr.frame_count();
        for (t, f) in tracks.iter().zip(spec.partial_frequencies()) {
            for p in t.points.iter().filter(|p| p.frame >= 2 && p.frame + 2 < n) {
                assert!(crate::cents::cents_between(p.frequency, f).abs() < 5.0);
            }
        }
    }

    #[test]
    fn high_pass_drops_low_partials() {
        let spec = ComplexToneSpec::harmonic(30.0, &[1.0, 0.0, 1.0, 0.0, 1.0], 0.1).high_passed(35.0);
        assert_eq!(spec.partial_frequencies(), vec![60.0, 90.0, 120.0, 150.0]);
    }

    #[test]
    fn document_round_trips_through_json() {
        let doc = SynthDocument::Unison {
            tone: ComplexToneSpec::bass_analogue(61.0, 12, &[(5, 20.0)], 1.0),
            voices: 3,
            detune_spread_cents: 12.0,
        };
        let json = serde_json::to_string(&doc).unwrap();
        let back: SynthDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(doc, back);
        let parsed: SynthDocument = serde_json::from_str(
            r#"{"kind":"complex_tone","f0":100,"duration_s":0.1,
                "partials":[{"harmonic":1,"amplitude":0.5},{"frequency_hz":310,"amplitude":0.1,"cent_offset":-5}]}"#,
        )
        .unwrap();
        let s = parsed.render(8000).unwrap();
        assert_eq!(s.len(), 800);
    }
}
