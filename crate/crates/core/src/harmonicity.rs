//! Deviation from a harmonic series, salient upper partials and odd-harmonic
//! structure of a single snapshot.

use serde::{Deserialize, Serialize};

use crate::cents::{amplitude_to_db, cents_between};
use crate::error::{Error, Result};
use crate::loudness::LoudnessContour;
use crate::pitch::{f0_gcd, fit_harmonic_series, GcdParams, DEFAULT_MIN_F0};
use crate::spectral::ComplexToneSnapshot;

pub const HARMONIC_MAX_CENTS: f64 = 3.0;
pub const QUASI_HARMONIC_MAX_CENTS: f64 = 10.0;
/// Tolerance for the reference series and for harmonic-number assignment.
pub const ASSIGNMENT_TOLERANCE_CENTS: f64 = 50.0;
pub const DEFAULT_MARGIN_DB: f64 = 0.0;
pub const MIN_CARRIER_RUN: usize = 3;
/// Even energy below this fraction of odd energy makes a tone odd-dominant.
pub const ODD_DOMINANCE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationThresholds {
    pub harmonic_max_cents: f64,
    pub quasi_harmonic_max_cents: f64,
}

impl Default for ClassificationThresholds {
    fn default() -> Self {
        Self {
            harmonic_max_cents: HARMONIC_MAX_CENTS,
            quasi_harmonic_max_cents: QUASI_HARMONIC_MAX_CENTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Harmonicity {
    Harmonic,
    QuasiHarmonic,
    Inharmonic,
}

impl Harmonicity {
    pub fn classify(max_abs_cents: f64, thresholds: &ClassificationThresholds) -> Self {
        if max_abs_cents <= thresholds.harmonic_max_cents {
            Self::Harmonic
        } else if max_abs_cents <= thresholds.quasi_harmonic_max_cents {
            Self::QuasiHarmonic
        } else {
            Self::Inharmonic
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialDeviation {
    pub frequency_hz: f64,
    /// Nearest integer multiple of the reference; `None` when further than
    /// [`ASSIGNMENT_TOLERANCE_CENTS`] from it.
    pub harmonic: Option<usize>,
    pub deviation_cents: f64,
}

/// Least-squares fit of `f_n = n f0 sqrt(1 + B n^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchFit {
    pub b: f64,
    pub f0_hz: f64,
    pub residual_rms_cents: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InharmonicityReport {
    pub f0_ref_hz: f64,
    pub partials: Vec<PartialDeviation>,
    pub max_abs_deviation_cents: f64,
    /// Absent with fewer than three assigned partials.
    pub stretch: Option<StretchFit>,
    pub classification: Harmonicity,
}

/// Reference fundamental: the GCD f0 at [`ASSIGNMENT_TOLERANCE_CENTS`], or
/// the harmonic series fitted from the lowest partial when none fits.
/// The flag reports whether the GCD search succeeded.
fn reference_f0(snapshot: &ComplexToneSnapshot) -> Option<(f64, bool)> {
    let params = GcdParams {
        tolerance_cents: ASSIGNMENT_TOLERANCE_CENTS,
        min_f0: DEFAULT_MIN_F0,
    };
    if let Some(f0) = f0_gcd(snapshot, &params) {
        return Some((f0, true));
    }
    let lowest = snapshot.lowest()?.frequency;
    Some((fit_harmonic_series(&snapshot.frequencies(), lowest).0, false))
}

fn nearest_harmonic(f: f64, f0: f64) -> (usize, f64) {
    let n = (f / f0).round().max(1.0);
    (n as usize, cents_between(f, n * f0))
}

pub fn inharmonicity(snapshot: &ComplexToneSnapshot) -> Result<InharmonicityReport> {
    inharmonicity_with(snapshot, &ClassificationThresholds::default())
}

pub fn inharmonicity_with(
    snapshot: &ComplexToneSnapshot,
    thresholds: &ClassificationThresholds,
) -> Result<InharmonicityReport> {
    if snapshot.len() < 2 {
        return Err(Error::InsufficientPartials {
            found: snapshot.len(),
            required: 2,
        });
    }
    let (f0_ref, _) = reference_f0(snapshot).expect("non-empty snapshot");
    let partials: Vec<PartialDeviation> = snapshot
        .partials()
        .iter()
        .map(|p| {
            let (n, dev) = nearest_harmonic(p.frequency, f0_ref);
            PartialDeviation {
                frequency_hz: p.frequency,
                harmonic: (dev.abs() <= ASSIGNMENT_TOLERANCE_CENTS).then_some(n),
                deviation_cents: dev,
            }
        })
        .collect();
    let max_abs = partials
        .iter()
        .map(|p| p.deviation_cents.abs())
        .fold(0.0, f64::max);
    let assigned: Vec<(usize, f64)> = partials
        .iter()
        .filter_map(|p| p.harmonic.map(|n| (n, p.frequency_hz)))
        .collect();
    Ok(InharmonicityReport {
        f0_ref_hz: f0_ref,
        stretch: fit_stretch(&assigned),
        max_abs_deviation_cents: max_abs,
        classification: Harmonicity::classify(max_abs, thresholds),
        partials,
    })
}

/// Regression of `(f_n / n)^2` on `n^2`: intercept `f0^2`, slope `f0^2 B`.
pub fn fit_stretch(assigned: &[(usize, f64)]) -> Option<StretchFit> {
    let mut distinct: Vec<usize> = assigned.iter().map(|a| a.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return None;
    }
    let pts: Vec<(f64, f64)> = assigned
        .iter()
        .map(|&(n, f)| {
            let n = n as f64;
            (n * n, (f / n).powi(2))
        })
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !(intercept > 0.0) {
        return None;
    }
    let f0 = intercept.sqrt();
    let b = slope / intercept;
    let sq: f64 = assigned
        .iter()
        .map(|&(n, f)| {
            let n = n as f64;
            let model = n * f0 * (1.0 + b * n * n).max(f64::MIN_POSITIVE).sqrt();
            cents_between(f, model).powi(2)
        })
        .sum();
    Some(StretchFit {
        b,
        f0_hz: f0,
        residual_rms_cents: (sq / m).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientPartial {
    /// Harmonic number relative to the lowest partial.
    pub index: usize,
    pub frequency_hz: f64,
    pub magnitude: f64,
    pub weighted_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Carrier {
    pub indices: Vec<usize>,
    /// Weighted-magnitude centroid of the run.
    pub center_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalienceReport {
    pub fundamental_hz: Option<f64>,
    pub margin_db: f64,
    pub partials: Vec<SalientPartial>,
    /// Upper-partial indices at least `margin_db` above the fundamental
    /// after weighting, ascending.
    pub salient: Vec<usize>,
    pub carriers: Vec<Carrier>,
}

impl SalienceReport {
    pub fn has_carrier(&self) -> bool {
        !self.carriers.is_empty()
    }

    pub fn salient_partials(&self) -> impl Iterator<Item = &SalientPartial> {
        self.partials.iter().filter(|p| self.salient.contains(&p.index))
    }
}

/// Upper partials whose weighted level reaches the fundamental's plus
/// `margin_db`. The fundamental is the lowest partial and every other
/// partial is indexed by its nearest integer ratio to it (the louder wins
/// when two land on one index). `contour = None` means the magnitudes are
/// used as they are, for snapshots that are already weighted or for a flat
/// reference.
pub fn detect_salient_partials(
    snapshot: &ComplexToneSnapshot,
    contour: Option<&LoudnessContour>,
    margin_db: f64,
) -> SalienceReport {
    let Some(fundamental) = snapshot.lowest().copied() else {
        return SalienceReport {
            fundamental_hz: None,
            margin_db,
            partials: Vec::new(),
            salient: Vec::new(),
            carriers: Vec::new(),
        };
    };
    let weigh = |f: f64, m: f64| amplitude_to_db(m * contour.map_or(1.0, |c| c.gain(f)));

    let mut partials: Vec<SalientPartial> = Vec::with_capacity(snapshot.len());
    for p in snapshot.partials() {
        let index = (p.frequency / fundamental.frequency).round().max(1.0) as usize;
        let entry = SalientPartial {
            index,
            frequency_hz: p.frequency,
            magnitude: p.magnitude,
            weighted_db: weigh(p.frequency, p.magnitude),
        };
        match partials.last_mut() {
            Some(last) if last.index == index => {
                if entry.weighted_db > last.weighted_db {
                    *last = entry;
                }
            }
            _ => partials.push(entry),
        }
    }
    let reference = partials[0].weighted_db;
    let salient: Vec<usize> = partials[1..]
        .iter()
        .filter(|p| p.weighted_db >= reference + margin_db)
        .map(|p| p.index)
        .collect();
    let carriers = carrier_runs(&salient)
        .into_iter()
        .map(|indices| {
            let members: Vec<&SalientPartial> =
                partials.iter().filter(|p| indices.contains(&p.index)).collect();
            let weights: Vec<f64> = members
                .iter()
                .map(|p| 10f64.powf(p.weighted_db / 20.0))
                .collect();
            let total: f64 = weights.iter().sum();
            let center_hz = members
                .iter()
                .zip(&weights)
                .map(|(p, w)| p.frequency_hz * w)
                .sum::<f64>()
                / total;
            Carrier { indices, center_hz }
        })
        .collect();
    SalienceReport {
        fundamental_hz: Some(fundamental.frequency),
        margin_db,
        partials,
        salient,
        carriers,
    }
}

/// Runs of at least [`MIN_CARRIER_RUN`] consecutive integers in a sorted
/// index list.
fn carrier_runs(sorted: &[usize]) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for &i in sorted {
        if current.last().is_some_and(|&l| l + 1 != i) {
            runs.push(std::mem::take(&mut current));
        }
        current.push(i);
    }
    runs.push(current);
    runs.retain(|r| r.len() >= MIN_CARRIER_RUN);
    runs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddHarmonicProfile {
    pub f0_ref_hz: f64,
    pub odd_energy: f64,
    pub even_energy: f64,
    /// Odd over even energy; absent when there is no even energy.
    pub odd_to_even_ratio: Option<f64>,
    /// Absent when harmonic numbers could not be assigned within tolerance.
    pub odd_dominant: Option<bool>,
    pub warning: Option<String>,
}

/// Odd versus even harmonic energy (squared magnitudes) of a snapshot.
pub fn odd_harmonic_profile(snapshot: &ComplexToneSnapshot) -> Result<OddHarmonicProfile> {
    if snapshot.len() < 4 {
        return Err(Error::InsufficientPartials {
            found: snapshot.len(),
            required: 4,
        });
    }
    let (f0, from_gcd) = reference_f0(snapshot).expect("non-empty snapshot");
    let mut odd = 0.0;
    let mut even = 0.0;
    let mut worst = 0.0f64;
    for p in snapshot.partials() {
        let (n, dev) = nearest_harmonic(p.frequency, f0);
        worst = worst.max(dev.abs());
        if n % 2 == 1 {
            odd += p.magnitude * p.magnitude;
        } else {
            even += p.magnitude * p.magnitude;
        }
    }
    let assignable = from_gcd && worst <= ASSIGNMENT_TOLERANCE_CENTS;
    Ok(OddHarmonicProfile {
        f0_ref_hz: f0,
        odd_energy: odd,
        even_energy: even,
        odd_to_even_ratio: (even > 0.0).then(|| odd / even),
        odd_dominant: assignable.then_some(even < ODD_DOMINANCE_FRACTION * odd),
        warning: (!assignable).then(|| {
            format!("partials deviate up to {worst:.1} cents from the nearest harmonic; ratio uses nearest-integer assignment")
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Window;
    use crate::spectral::{pick_peaks, spectrum, Partial, PeakParams};
    use crate::synth::{synth_complex_tone, ComplexToneSpec};
    use proptest::prelude::*;

    fn snapshot(freqs: &[f64], mags: &[f64]) -> ComplexToneSnapshot {
        ComplexToneSnapshot::new(freqs.iter().zip(mags).map(|(&frequency, &magnitude)| Partial {
            frequency,
            magnitude,
        }))
    }

    fn harmonics(f0: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|k| k as f64 * f0).collect()
    }

    #[test]
    fn exact_harmonics() {
        let r = inharmonicity(&ComplexToneSnapshot::from_frequencies(&harmonics(110.0, 10))).unwrap();
        assert!((r.f0_ref_hz - 110.0).abs() < 1e-9);
        assert!(r.partials.iter().all(|p| p.deviation_cents.abs() < 1e-9));
        let s = r.stretch.unwrap();
        assert!(s.b.abs() < 1e-6);
        assert_eq!(r.classification, Harmonicity::Harmonic);
    }

    #[test]
    fn generator_tone_is_harmonic() {
        let spec = ComplexToneSpec::bass_analogue(61.0, 12, &[(5, 20.0)], 1.0);
        let snap = ComplexToneSnapshot::from_frequencies(&spec.partial_frequencies());
        let r = inharmonicity(&snap).unwrap();
        assert!(r.stretch.unwrap().b.abs() < 1e-6);
        assert_eq!(r.classification, Harmonicity::Harmonic);

        // and through analysis
        let signal = synth_complex_tone(&spec.transposed(0.0), 48_000).unwrap();
        let (mags, freqs) = spectrum(&signal, Window::Hann).unwrap();
        let analysed = pick_peaks(&mags, &freqs, &PeakParams::default());
        assert_eq!(inharmonicity(&analysed).unwrap().classification, Harmonicity::Harmonic);
    }

    #[test]
    fn jittered_vocal_is_quasi_harmonic() {
        let jitter = [0.0, 9.0, -9.0, 6.0, -6.0, 3.0, -3.0, 7.0, -7.0];
        let freqs: Vec<f64> = jitter
            .iter()
            .enumerate()
            .map(|(i, c)| crate::cents::transpose((i + 1) as f64 * 220.0, *c))
            .collect();
        let r = inharmonicity(&ComplexToneSnapshot::from_frequencies(&freqs)).unwrap();
        assert_eq!(r.classification, Harmonicity::QuasiHarmonic, "{}", r.max_abs_deviation_cents);
    }

    #[test]
    fn stretched_partials_recover_b() {
        let b = 4e-4;
        let f0 = 110.0;
        let freqs: Vec<f64> = (1..=12)
            .map(|n| {
                let n = n as f64;
                n * f0 * (1.0 + b * n * n).sqrt()
            })
            .collect();
        let r = inharmonicity(&ComplexToneSnapshot::from_frequencies(&freqs)).unwrap();
        let s = r.stretch.unwrap();
        assert!((s.b - b).abs() / b < 0.1, "{}", s.b);
        assert!(s.residual_rms_cents < 0.5);
        assert_eq!(r.classification, Harmonicity::Inharmonic);
    }

    #[test]
    fn too_few_partials() {
        let one = ComplexToneSnapshot::from_frequencies(&[100.0]);
        assert!(matches!(
            inharmonicity(&one),
            Err(Error::InsufficientPartials { found: 1, required: 2 })
        ));
        let two = inharmonicity(&ComplexToneSnapshot::from_frequencies(&[100.0, 201.0])).unwrap();
        assert!(two.stretch.is_none());
        assert_eq!(two.partials.len(), 2);
    }

    proptest! {
        #[test]
        fn deviations_transpose_invariant(c in 0.5f64..4.0, jitter in proptest::collection::vec(-8.0f64..8.0, 6)) {
            let freqs: Vec<f64> = jitter
                .iter()
                .enumerate()
                .map(|(i, d)| crate::cents::transpose((i + 1) as f64 * 100.0, *d))
                .collect();
            let scaled: Vec<f64> = freqs.iter().map(|f| f * c).collect();
            let a = inharmonicity(&ComplexToneSnapshot::from_frequencies(&freqs)).unwrap();
            let b = inharmonicity(&ComplexToneSnapshot::from_frequencies(&scaled)).unwrap();
            for (x, y) in a.partials.iter().zip(&b.partials) {
                prop_assert!((x.deviation_cents - y.deviation_cents).abs() < 0.1);
            }
        }
    }

    #[test]
    fn flat_equal_partials_have_no_salience() {
        let snap = snapshot(&harmonics(50.0, 12), &[1.0; 12]);
        assert!(detect_salient_partials(&snap, None, 6.0).salient.is_empty());
        // 50-phon weighting favours the upper partials of a low tone
        let weighted = detect_salient_partials(&snap, Some(&LoudnessContour::iso226_50_phon()), 6.0);
        assert!(!weighted.salient.is_empty());
    }

    #[test]
    fn margin_extremes() {
        let snap = snapshot(&harmonics(100.0, 6), &[1.0, 0.1, 0.5, 2.0, 0.01, 1.0]);
        assert!(detect_salient_partials(&snap, None, f64::INFINITY).salient.is_empty());
        assert_eq!(
            detect_salient_partials(&snap, None, f64::NEG_INFINITY).salient,
            vec![2, 3, 4, 5, 6]
        );
        assert_eq!(detect_salient_partials(&snap, None, 0.0).salient, vec![4, 6]);
    }

    #[test]
    fn empty_snapshot_reports_nothing() {
        let r = detect_salient_partials(&ComplexToneSnapshot::default(), None, 0.0);
        assert!(r.salient.is_empty() && r.fundamental_hz.is_none());
    }

    #[test]
    fn missing_partials_keep_harmonic_indices() {
        let snap = snapshot(&[100.0, 300.0, 500.0, 700.0], &[1.0, 0.2, 3.0, 0.1]);
        let r = detect_salient_partials(&snap, None, 0.0);
        assert_eq!(r.salient, vec![5]);
        assert!(!r.has_carrier());
    }

    #[test]
    fn consecutive_run_is_a_carrier() {
        let mut mags = vec![0.1; 12];
        mags[0] = 1.0;
        for m in &mut mags[6..9] {
            *m = 2.0;
        }
        mags[10] = 2.0;
        let r = detect_salient_partials(&snapshot(&harmonics(100.0, 12), &mags), None, 0.0);
        assert_eq!(r.salient, vec![7, 8, 9, 11]);
        assert_eq!(r.carriers.len(), 1);
        assert_eq!(r.carriers[0].indices, vec![7, 8, 9]);
        assert!((r.carriers[0].center_hz - 800.0).abs() < 1e-9);
    }

    #[test]
    fn carrier_runs_split() {
        assert_eq!(carrier_runs(&[2, 3, 4, 6, 7, 9, 10, 11, 12]), vec![vec![2, 3, 4], vec![9, 10, 11, 12]]);
        assert!(carrier_runs(&[]).is_empty());
    }

    #[test]
    fn square_and_saw() {
        let odd: Vec<f64> = (0..8).map(|k| (2 * k + 1) as f64 * 100.0).collect();
        let odd_mags: Vec<f64> = (0..8).map(|k| 1.0 / (2 * k + 1) as f64).collect();
        let p = odd_harmonic_profile(&snapshot(&odd, &odd_mags)).unwrap();
        assert_eq!(p.odd_dominant, Some(true));
        assert_eq!(p.odd_to_even_ratio, None);

        let saw_mags: Vec<f64> = (1..=16).map(|k| 1.0 / k as f64).collect();
        let p = odd_harmonic_profile(&snapshot(&harmonics(100.0, 16), &saw_mags)).unwrap();
        assert_eq!(p.odd_dominant, Some(false));
        assert!(p.odd_to_even_ratio.unwrap() > 1.0);
    }

    #[test]
    fn missing_fundamental_odd_tone_keeps_f0() {
        let odd: Vec<f64> = (1..8).map(|k| (2 * k + 1) as f64 * 30.0).collect();
        let p = odd_harmonic_profile(&ComplexToneSnapshot::from_frequencies(&odd)).unwrap();
        assert!((p.f0_ref_hz - 30.0).abs() < 1e-9);
        assert_eq!(p.odd_dominant, Some(true));
    }

    #[test]
    fn profile_warns_when_unassignable() {
        assert!(odd_harmonic_profile(&ComplexToneSnapshot::from_frequencies(&[100.0, 200.0, 300.0])).is_err());
        let irregular = ComplexToneSnapshot::from_frequencies(&[25.0, 41.0, 67.0, 93.0, 113.0]);
        let p = odd_harmonic_profile(&irregular).unwrap();
        assert!(p.odd_dominant.is_none());
        assert!(p.warning.is_some());
    }
}
