//! Flat key-value analysis configuration. Every default comes from the
//! owning module's constant.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonicity::DEFAULT_MARGIN_DB;
use crate::modal::{FoldWeighting, DEFAULT_MIN_MASS};
use crate::pitch::{
    AcfParams, GcdParams, PitchMethod, DEFAULT_ACF_MAX_FREQ, DEFAULT_ACF_MIN_FREQ, DEFAULT_ACF_THRESHOLD,
    DEFAULT_GCD_TOLERANCE_CENTS, DEFAULT_MIN_F0,
};
use crate::signal::Window;
use crate::spectral::{
    FramingParams, PeakParams, TrackingParams, DEFAULT_FRAME_LENGTH, DEFAULT_HOP, DEFAULT_MAX_JUMP_CENTS,
    DEFAULT_MIN_PROMINENCE_DB, DEFAULT_MIN_TRACK_FRAMES, DEFAULT_THRESHOLD_DB,
};

/// Share of voiced frames in which an index must be salient to enter a
/// stem's summary salient set.
pub const DEFAULT_SALIENT_FRAME_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub window: Window,
    /// Zero-padded transform size; 0 means the frame length.
    pub fft_size: usize,
    /// Apply the 50-phon equal-loudness weighting before peak picking.
    pub weighting: bool,
    /// Contour table replacing the built-in one.
    pub contour_path: Option<String>,
    pub threshold_db: f64,
    pub min_prominence_db: f64,
    pub max_jump_cents: f64,
    pub min_track_frames: usize,
    pub gcd_tolerance_cents: f64,
    pub min_f0_hz: f64,
    pub acf_min_freq_hz: f64,
    pub acf_max_freq_hz: f64,
    pub acf_threshold: f64,
    pub margin_db: f64,
    pub salient_frame_fraction: f64,
    /// Pitch track folded for pole and mode estimation.
    pub mode_track: PitchMethod,
    pub fold_weighting: FoldWeighting,
    pub min_mass: f64,
    /// Final as Hz or note name; the highest-mass pole when absent.
    #[serde(rename = "final")]
    pub final_pitch: Option<String>,
    /// Include each stem's mean spectrum in the report.
    pub include_spectrum: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            frame_length: DEFAULT_FRAME_LENGTH,
            hop: DEFAULT_HOP,
            window: Window::Hann,
            fft_size: 0,
            weighting: true,
            contour_path: None,
            threshold_db: DEFAULT_THRESHOLD_DB,
            min_prominence_db: DEFAULT_MIN_PROMINENCE_DB,
            max_jump_cents: DEFAULT_MAX_JUMP_CENTS,
            min_track_frames: DEFAULT_MIN_TRACK_FRAMES,
            gcd_tolerance_cents: DEFAULT_GCD_TOLERANCE_CENTS,
            min_f0_hz: DEFAULT_MIN_F0,
            acf_min_freq_hz: DEFAULT_ACF_MIN_FREQ,
            acf_max_freq_hz: DEFAULT_ACF_MAX_FREQ,
            acf_threshold: DEFAULT_ACF_THRESHOLD,
            margin_db: DEFAULT_MARGIN_DB,
            salient_frame_fraction: DEFAULT_SALIENT_FRAME_FRACTION,
            mode_track: PitchMethod::LowestPartial,
            fold_weighting: FoldWeighting::Salience,
            min_mass: DEFAULT_MIN_MASS,
            final_pitch: None,
            include_spectrum: false,
        }
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.frame_length == 0 || self.hop == 0 || self.hop > self.frame_length {
            return fail(format!("frame_length {} / hop {}", self.frame_length, self.hop));
        }
        if self.fft_size != 0 && self.fft_size < self.frame_length {
            return fail(format!("fft_size {} below frame_length", self.fft_size));
        }
        if !(0.0..=1.0).contains(&self.salient_frame_fraction) {
            return fail("salient_frame_fraction outside [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.min_mass) {
            return fail("min_mass outside [0, 1]".into());
        }
        if !(self.acf_min_freq_hz > 0.0 && self.acf_max_freq_hz > self.acf_min_freq_hz) {
            return fail("acf frequency bounds".into());
        }
        Ok(())
    }

    pub fn framing(&self) -> FramingParams {
        let fft = if self.fft_size == 0 { self.frame_length } else { self.fft_size };
        FramingParams::new(self.frame_length, self.hop, self.window).with_fft_size(fft)
    }

    pub fn peaks(&self) -> PeakParams {
        PeakParams {
            threshold_db: self.threshold_db,
            min_prominence_db: self.min_prominence_db,
        }
    }

    pub fn tracking(&self) -> TrackingParams {
        TrackingParams {
            max_jump_cents: self.max_jump_cents,
            min_track_frames: self.min_track_frames,
        }
    }

    pub fn gcd(&self) -> GcdParams {
        GcdParams {
            tolerance_cents: self.gcd_tolerance_cents,
            min_f0: self.min_f0_hz,
        }
    }

    pub fn acf(&self) -> AcfParams {
        AcfParams {
            min_freq: self.acf_min_freq_hz,
            max_freq: self.acf_max_freq_hz,
            threshold: self.acf_threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(AnalysisConfig::parse("").unwrap(), AnalysisConfig::default());
    }

    #[test]
    fn defaults_match_modules() {
        let c = AnalysisConfig::default();
        assert_eq!(c.framing(), FramingParams::default());
        assert_eq!(c.peaks(), PeakParams::default());
        assert_eq!(c.tracking(), TrackingParams::default());
        assert_eq!(c.gcd(), GcdParams::default());
        assert_eq!(c.acf(), AcfParams::default());
    }

    #[test]
    fn flat_overrides() {
        let c = AnalysisConfig::parse("hop = 512\nweighting = false\nfinal = \"E2+41c\"\nwindow = \"rectangular\"").unwrap();
        assert_eq!(c.hop, 512);
        assert!(!c.weighting);
        assert_eq!(c.final_pitch.as_deref(), Some("E2+41c"));
        assert_eq!(c.window, Window::Rectangular);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(AnalysisConfig::parse("hopp = 3"), Err(Error::Config(_))));
        assert!(AnalysisConfig::parse("hop = 9000").is_err());
        assert!(AnalysisConfig::parse("[section]\nhop = 1").is_err());
    }
}
