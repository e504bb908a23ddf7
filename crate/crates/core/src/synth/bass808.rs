//! Additive model of an 808-style bass: a harmonic tone whose instantaneous
//! f0 falls exponentially from `target * 2^(depth/1200)` onto `target`, under
//! an exponential amplitude decay, with a per-mode harmonic boost.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{bass_partial_level_db, check_nyquist, limit_peak};
use crate::cents::db_to_amplitude;
use crate::error::{Error, Result};
use crate::signal::Signal;

pub const DEFAULT_GLIDE_DEPTH_CENTS: f64 = 100.0;
pub const DEFAULT_HARMONICS: usize = 12;
pub const MIN_TARGET_F0: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostPattern {
    Harmonics(Vec<usize>),
    Even,
    Odd,
}

impl BoostPattern {
    pub fn boosts(&self, harmonic: usize) -> bool {
        match self {
            BoostPattern::Harmonics(set) => set.contains(&harmonic),
            BoostPattern::Even => harmonic >= 2 && harmonic % 2 == 0,
            BoostPattern::Odd => harmonic >= 3 && harmonic % 2 == 1,
        }
    }

    pub fn boosted(&self, harmonics: usize) -> Vec<usize> {
        (1..=harmonics).filter(|&n| self.boosts(n)).collect()
    }
}

/// Mode number to boost pattern. Modes 1-3 are the documented patterns
/// (3 and 5; 8 and 10; even harmonics). Modes 4-7 ship placeholder patterns
/// and can be replaced from data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoostTable(pub BTreeMap<u8, BoostPattern>);

impl Default for BoostTable {
    fn default() -> Self {
        let mut modes = BTreeMap::new();
        modes.insert(1, BoostPattern::Harmonics(vec![3, 5]));
        modes.insert(2, BoostPattern::Harmonics(vec![8, 10]));
        modes.insert(3, BoostPattern::Even);
        // non-normative
        modes.insert(4, BoostPattern::Harmonics(vec![2, 3]));
        modes.insert(5, BoostPattern::Harmonics(vec![4, 6]));
        modes.insert(6, BoostPattern::Harmonics(vec![5, 7]));
        modes.insert(7, BoostPattern::Odd);
        Self(modes)
    }
}

impl BoostTable {
    pub fn pattern(&self, mode: u8) -> Option<&BoostPattern> {
        self.0.get(&mode)
    }
}

fn default_depth() -> f64 {
    DEFAULT_GLIDE_DEPTH_CENTS
}

fn default_harmonics() -> usize {
    DEFAULT_HARMONICS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bass808Patch {
    pub target_f0: f64,
    /// 1..=7
    pub mode: u8,
    /// Boost applied to the mode's harmonics, dB.
    pub amount_db: f64,
    #[serde(default = "default_depth")]
    pub pitch_glide_depth_cents: f64,
    pub glide_time_constant_s: f64,
    /// Amplitude decay time constant.
    pub decay_s: f64,
    pub duration_s: f64,
    #[serde(default = "default_harmonics")]
    pub harmonics: usize,
    #[serde(default)]
    pub boost_table: Option<BoostTable>,
}

impl Bass808Patch {
    pub fn new(target_f0: f64, mode: u8, amount_db: f64) -> Self {
        Self {
            target_f0,
            mode,
            amount_db,
            pitch_glide_depth_cents: DEFAULT_GLIDE_DEPTH_CENTS,
            glide_time_constant_s: 0.15,
            decay_s: 1.5,
            duration_s: 1.5,
            harmonics: DEFAULT_HARMONICS,
            boost_table: None,
        }
    }

    /// Instantaneous f0 at time `t`.
    pub fn f0_at(&self, t: f64) -> f64 {
        let cents = self.pitch_glide_depth_cents * (-t / self.glide_time_constant_s).exp();
        self.target_f0 * (cents / 1200.0).exp2()
    }

    pub fn boosted_harmonics(&self) -> Result<Vec<usize>> {
        Ok(self.pattern()?.boosted(self.harmonics))
    }

    fn pattern(&self) -> Result<BoostPattern> {
        let default = BoostTable::default();
        let table = self.boost_table.as_ref().unwrap_or(&default);
        table
            .pattern(self.mode)
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("no boost pattern for mode {}", self.mode)))
    }

    /// Linear amplitude of harmonic `n` (fundamental at 0.5).
    pub fn harmonic_amplitude(&self, n: usize, pattern: &BoostPattern) -> f64 {
        let boost = if pattern.boosts(n) { self.amount_db } else { 0.0 };
        0.5 * db_to_amplitude(bass_partial_level_db(n) + boost)
    }

    fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(1..=7).contains(&self.mode) {
            return Err(Error::InvalidParameter(format!("mode {} outside 1..=7", self.mode)));
        }
        if !(self.target_f0 >= MIN_TARGET_F0) {
            return Err(Error::InvalidParameter(format!(
                "target f0 {} below {MIN_TARGET_F0} Hz",
                self.target_f0
            )));
        }
        if !(self.decay_s > 0.0) {
            return Err(Error::InvalidParameter("decay must be positive".into()));
        }
        if !(self.glide_time_constant_s > 0.0) {
            return Err(Error::InvalidParameter("glide time constant must be positive".into()));
        }
        if self.harmonics == 0 {
            return Err(Error::InvalidParameter("at least one harmonic".into()));
        }
        if !(self.duration_s >= 0.0) {
            return Err(Error::InvalidParameter("duration must be non-negative".into()));
        }
        // the glide peaks at t = 0 (or at the target for a negative depth)
        let highest = self.f0_at(0.0).max(self.target_f0) * self.harmonics as f64;
        check_nyquist(&[highest], sample_rate)
    }
}

pub fn synth_808(patch: &Bass808Patch, sample_rate: u32) -> Result<Signal> {
    patch.validate(sample_rate)?;
    let pattern = patch.pattern()?;
    let sr = sample_rate as f64;
    let n = (patch.duration_s * sr).round() as usize;
    let amplitudes: Vec<f64> = (1..=patch.harmonics)
        .map(|h| patch.harmonic_amplitude(h, &pattern))
        .collect();

    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        let s: f64 = amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * phase).sin())
            .sum();
        samples.push(s * (-t / patch.decay_s).exp());
        // midpoint-rule phase advance
        phase += 2.0 * PI * patch.f0_at(t + 0.5 / sr) / sr;
    }
    Signal::new(limit_peak(samples), sample_rate)
}
