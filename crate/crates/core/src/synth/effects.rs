use serde::{Deserialize, Serialize};

use super::{check_nyquist, limit_peak, render_tone, ComplexToneSpec};
use crate::error::{Error, Result};
use crate::signal::Signal;

/// Polynomial transfer `y = sum_k c_k (drive x)^k`, blended with the dry
/// input by `mix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveshaperSpec {
    /// `coefficients[k]` multiplies the k-th power; index 0 is the constant term.
    pub coefficients: Vec<f64>,
    #[serde(default = "unit")]
    pub drive: f64,
    #[serde(default = "unit")]
    pub mix: f64,
}

fn unit() -> f64 {
    1.0
}

impl WaveshaperSpec {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            drive: 1.0,
            mix: 1.0,
        }
    }

    pub fn identity() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    fn validate(&self) -> Result<()> {
        if self.degree() < 1 {
            return Err(Error::InvalidParameter("waveshaper degree must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::InvalidParameter(format!("mix {} outside [0, 1]", self.mix)));
        }
        if !self.drive.is_finite() || self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite waveshaper parameter".into()));
        }
        Ok(())
    }

    /// Horner evaluation of the transfer polynomial at `u`.
    pub fn transfer(&self, u: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }
}

pub fn waveshape(signal: &Signal, spec: &WaveshaperSpec) -> Result<Signal> {
    spec.validate()?;
    let samples = signal
        .samples()
        .iter()
        .map(|&x| {
            let wet = spec.transfer(spec.drive * x);
            if spec.mix == 1.0 {
                wet
            } else {
                spec.mix * wet + (1.0 - spec.mix) * x
            }
        })
        .collect();
    Signal::new(samples, signal.sample_rate())
}

/// Sample-wise product.
pub fn ring_modulate(a: &Signal, b: &Signal) -> Result<Signal> {
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::SignalMismatch(format!(
            "sample rates {} and {}",
            a.sample_rate(),
            b.sample_rate()
        )));
    }
    if a.len() != b.len() {
        return Err(Error::SignalMismatch(format!("lengths {} and {}", a.len(), b.len())));
    }
    let samples = a.samples().iter().zip(b.samples()).map(|(x, y)| x * y).collect();
    Signal::new(samples, a.sample_rate())
}

/// Detunes (cents) of `voices` copies spread evenly over
/// `[-spread/2, +spread/2]`.
pub fn unison_detunes(voices: usize, spread_cents: f64) -> Vec<f64> {
    match voices {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n)
            .map(|i| -spread_cents / 2.0 + spread_cents * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Sum of `voices` detuned renders of `tone`, scaled by `1/voices`.
pub fn unison(tone: &ComplexToneSpec, voices: usize, spread_cents: f64, sample_rate: u32) -> Result<Signal> {
    if voices == 0 {
        return Err(Error::InvalidParameter("unison needs at least one voice".into()));
    }
    let detunes = unison_detunes(voices, spread_cents);
    let mut acc: Option<Vec<f64>> = None;
    for d in detunes {
        let voice = if d == 0.0 { tone.clone() } else { tone.transposed(d) };
        voice.validate(sample_rate)?;
        let rendered = render_tone(&voice, sample_rate, None);
        acc = Some(match acc {
            None => rendered,
            Some(mut sum) => {
                for (s, v) in sum.iter_mut().zip(rendered) {
                    *s += v;
                }
                sum
            }
        });
    }
    let mut samples = acc.unwrap_or_default();
    if voices > 1 {
        let g = 1.0 / voices as f64;
        samples.iter_mut().for_each(|s| *s *= g);
    }
    Signal::new(limit_peak(samples), sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlideKind {
    /// Linear in cents between breakpoints.
    #[default]
    Bend,
    /// Exponential approach between breakpoints, like a tape or turntable
    /// changing speed: fast at first, settling into the next breakpoint.
    Screw,
}

/// Pitch offset in cents over time. Held constant before the first and after
/// the last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchContour {
    /// (time s, cents), times strictly increasing.
    pub breakpoints: Vec<(f64, f64)>,
    #[serde(default)]
    pub kind: GlideKind,
}

pub const MAX_CONTOUR_CENTS: f64 = 2400.0;
const SCREW_RATE: f64 = 5.0;

impl PitchContour {
    pub fn new(breakpoints: Vec<(f64, f64)>, kind: GlideKind) -> Self {
        Self { breakpoints, kind }
    }

    pub fn flat() -> Self {
        Self::new(vec![(0.0, 0.0)], GlideKind::Bend)
    }

    pub fn is_flat_zero(&self) -> bool {
        self.breakpoints.iter().all(|&(_, c)| c == 0.0)
    }

    fn validate(&self) -> Result<()> {
        if self.breakpoints.is_empty() {
            return Err(Error::InvalidParameter("contour has no breakpoints".into()));
        }
        if self.breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter("contour times must increase".into()));
        }
        if let Some(&(t, c)) = self
            .breakpoints
            .iter()
            .find(|&&(t, c)| !t.is_finite() || !(c.abs() <= MAX_CONTOUR_CENTS))
        {
            return Err(Error::InvalidParameter(format!(
                "contour point ({t}, {c}) outside +/-{MAX_CONTOUR_CENTS} cents"
            )));
        }
        Ok(())
    }

    pub fn cents_at(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        if t <= bp[0].0 {
            return bp[0].1;
        }
        let last = bp[bp.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let k = bp.partition_point(|&(bt, _)| bt <= t) - 1;
        let ((t0, c0), (t1, c1)) = (bp[k], bp[k + 1]);
        let u = (t - t0) / (t1 - t0);
        let shape = match self.kind {
            GlideKind::Bend => u,
            GlideKind::Screw => (1.0 - (-SCREW_RATE * u).exp()) / (1.0 - (-SCREW_RATE).exp()),
        };
        c0 + (c1 - c0) * shape
    }

    pub fn max_cents(&self) -> f64 {
        self.breakpoints.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Warped time `W(t_i) = integral_0^t_i 2^(c(s)/1200) ds` per sample,
    /// midpoint rule. A flat zero contour gives the identity exactly.
    fn time_warp(&self, n: usize, sample_rate: u32) -> Vec<f64> {
        let sr = sample_rate as f64;
        if self.is_flat_zero() {
            return (0..n).map(|i| i as f64 / sr).collect();
        }
        let dt = 1.0 / sr;
        let mut w = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n {
            w.push(acc);
            let mid = (i as f64 + 0.5) * dt;
            acc += (self.cents_at(mid) / 1200.0).exp2() * dt;
        }
        w
    }
}

/// Renders `tone` with every partial following the pitch contour,
/// phase-continuously.
pub fn glide(tone: &ComplexToneSpec, contour: &PitchContour, sample_rate: u32) -> Result<Signal> {
    contour.validate()?;
    tone.validate(sample_rate)?;
    let ratio = (contour.max_cents() / 1200.0).exp2();
    let peak_freqs: Vec<f64> = tone.partial_frequencies().iter().map(|f| f * ratio).collect();
    check_nyquist(&peak_freqs, sample_rate)?;
    let warp = contour.time_warp(tone.sample_count(sample_rate), sample_rate);
    Signal::new(limit_peak(render_tone(tone, sample_rate, Some(&warp))), sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cents::{amplitude_to_db, cents_between};
    use crate::signal::{rms_envelope, Window};
    use crate::spectral::{pick_peaks, spectrum, PeakParams};
    use crate::synth::synth_complex_tone;

    fn sine(f: f64, amp: f64, secs: f64, sr: u32) -> Signal {
        synth_complex_tone(&ComplexToneSpec::sine(f, amp, secs), sr).unwrap()
    }

    fn peak_freqs(signal: &Signal) -> Vec<(f64, f64)> {
        let (mags, freqs) = spectrum(signal, Window::Hann).unwrap();
        let params = PeakParams { threshold_db: -60.0, min_prominence_db: 6.0 };
        pick_peaks(&mags, &freqs, &params)
            .partials()
            .iter()
            .map(|p| (p.frequency, p.magnitude))
            .collect()
    }

    #[test]
    fn identity_shaper_is_exact() {
        let s = sine(440.0, 0.7, 0.05, 48_000);
        let out = waveshape(&s, &WaveshaperSpec::identity()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn cubic_gives_f_and_3f() {
        let s = sine(440.0, 0.9, 1.0, 48_000);
        let out = waveshape(&s, &WaveshaperSpec::new(vec![0.0, 0.0, 0.0, 1.0])).unwrap();
        let peaks = peak_freqs(&out);
        assert_eq!(peaks.len(), 2, "{peaks:?}");
        assert!((peaks[0].0 - 440.0).abs() < 1e-6);
        assert!((peaks[1].0 - 1320.0).abs() < 1e-6);
        assert!((peaks[0].1 / peaks[1].1 - 3.0).abs() < 1e-3);
    }

    #[test]
    fn shaper_rejects_bad_specs() {
        let s = sine(440.0, 0.5, 0.01, 8000);
        assert!(waveshape(&s, &WaveshaperSpec::new(vec![0.5])).is_err());
        let mut spec = WaveshaperSpec::identity();
        spec.mix = 1.5;
        assert!(waveshape(&s, &spec).is_err());
    }

    #[test]
    fn ring_mod_sum_and_difference() {
        let a = sine(100.0, 0.9, 1.0, 48_000);
        let b = sine(30.0, 0.9, 1.0, 48_000);
        let out = ring_modulate(&a, &b).unwrap();
        let peaks = peak_freqs(&out);
        let found: Vec<f64> = peaks.iter().map(|p| p.0).collect();
        assert_eq!(found.len(), 2, "{peaks:?}");
        assert!((found[0] - 70.0).abs() < 1e-6 && (found[1] - 130.0).abs() < 1e-6);
    }

    #[test]
    fn ring_mod_with_unit_is_identity() {
        let a = sine(100.0, 0.9, 0.1, 48_000);
        let one = Signal::new(vec![1.0; a.len()], 48_000).unwrap();
        assert_eq!(ring_modulate(&a, &one).unwrap(), a);
    }

    #[test]
    fn ring_mod_mismatch() {
        let a = sine(100.0, 0.9, 0.1, 48_000);
        let b = sine(100.0, 0.9, 0.2, 48_000);
        assert!(ring_modulate(&a, &b).is_err());
        let c = sine(100.0, 0.9, 0.1, 44_100);
        assert!(ring_modulate(&a, &c).is_err());
    }

    #[test]
    fn ring_mod_is_bilinear() {
        let x = sine(100.0, 0.9, 0.1, 48_000);
        let y = sine(37.0, 0.5, 0.1, 48_000);
        for gain in [0.5, -2.0, 0.3, 7.25] {
            let lhs = ring_modulate(&x.scaled(gain), &y).unwrap();
            let rhs = ring_modulate(&x, &y).unwrap().scaled(gain);
            for (a, b) in lhs.samples().iter().zip(rhs.samples()) {
                // exact for powers of two, within rounding otherwise
                assert!((a - b).abs() <= 2.0 * f64::EPSILON * b.abs());
            }
        }
    }

    #[test]
    fn unison_single_voice_is_plain_render() {
        let tone = ComplexToneSpec::harmonic(110.0, &[0.3, 0.2, 0.1], 0.2);
        assert_eq!(
            unison(&tone, 1, 25.0, 48_000).unwrap(),
            synth_complex_tone(&tone, 48_000).unwrap()
        );
    }

    #[test]
    fn unison_detunes_even() {
        assert_eq!(unison_detunes(3, 20.0), vec![-10.0, 0.0, 10.0]);
        assert_eq!(unison_detunes(2, 8.0), vec![-4.0, 4.0]);
    }

    fn envelope_rate(signal: &Signal) -> f64 {
        let sr = signal.sample_rate() as f64;
        let hop = 48;
        let env = rms_envelope(signal, 480, hop).unwrap();
        let mean = env.iter().sum::<f64>() / env.len() as f64;
        let ups: Vec<usize> = env
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] < mean && w[1] >= mean)
            .map(|(i, _)| i)
            .collect();
        (ups.len() - 1) as f64 / ((ups[ups.len() - 1] - ups[0]) as f64 * hop as f64 / sr)
    }

    #[test]
    fn unison_beats() {
        let tone = ComplexToneSpec::sine(440.0, 0.5, 3.0);
        let d = 40.0;
        let s = unison(&tone, 2, d, 48_000).unwrap();
        let expected = 440.0 * ((d / 1200.0).exp2() - 1.0);
        let measured = envelope_rate(&s);
        assert!((measured - expected).abs() / expected < 0.05, "{measured} vs {expected}");
    }

    #[test]
    fn unison_without_detune_is_steady() {
        let tone = ComplexToneSpec::sine(440.0, 0.5, 1.0);
        let s = unison(&tone, 2, 0.0, 48_000).unwrap();
        let env = rms_envelope(&s, 4800, 2400).unwrap();
        let (lo, hi) = env.iter().fold((f64::MAX, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(amplitude_to_db(hi) - amplitude_to_db(lo) < 0.1);
    }

    #[test]
    fn flat_glide_is_plain_render() {
        let tone = ComplexToneSpec::harmonic(220.0, &[0.4, 0.2], 0.3);
        let plain = synth_complex_tone(&tone, 48_000).unwrap();
        let glided = glide(&tone, &PitchContour::flat(), 48_000).unwrap();
        assert_eq!(plain, glided);
        let two_point = PitchContour::new(vec![(0.0, 0.0), (0.2, 0.0)], GlideKind::Screw);
        assert_eq!(glide(&tone, &two_point, 48_000).unwrap(), plain);
    }

    #[test]
    fn glide_contour_limits() {
        let tone = ComplexToneSpec::sine(220.0, 0.4, 0.1);
        let too_wide = PitchContour::new(vec![(0.0, 0.0), (0.1, 2500.0)], GlideKind::Bend);
        assert!(glide(&tone, &too_wide, 48_000).is_err());
        let aliasing = PitchContour::new(vec![(0.0, 0.0), (0.1, 2400.0)], GlideKind::Bend);
        let high = ComplexToneSpec::sine(2000.0, 0.4, 0.1);
        assert!(matches!(glide(&high, &aliasing, 16_000), Err(Error::AboveNyquist { .. })));
    }

    #[test]
    fn screw_shape_endpoints() {
        let c = PitchContour::new(vec![(0.0, 0.0), (1.0, -1200.0)], GlideKind::Screw);
        assert_eq!(c.cents_at(0.0), 0.0);
        assert_eq!(c.cents_at(1.0), -1200.0);
        // front-loaded: more than half the drop in the first half
        assert!(c.cents_at(0.5) < -600.0);
        let b = PitchContour::new(vec![(0.0, 0.0), (1.0, -1200.0)], GlideKind::Bend);
        assert!((b.cents_at(0.5) + 600.0).abs() < 1e-9);
        assert!(cents_between(440.0, 220.0) > 0.0);
    }
}
