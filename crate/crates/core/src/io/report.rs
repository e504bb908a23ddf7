//! The `analyze` pipeline and its JSON report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::AnalysisConfig;
use super::note::parse_frequency;
use super::tables::load_segments;
use super::wav::decode_wav;
use crate::beatmap::BeatMap;
use crate::cents::transpose;
use crate::error::{Error, Result};
use crate::harmonicity::{detect_salient_partials, inharmonicity, Harmonicity, SalienceReport};
use crate::loudness::LoudnessContour;
use crate::modal::{
    estimate_poles, estimate_tuning_offset, fold_to_pitch_classes, infer_mode, FinalSelection, FoldWeighting,
    ModeEstimate,
    PoleDistribution, Segment, SegmentOffset,
};
use crate::pitch::{
    autocorrelation_track, gcd_track, lowest_partial_track, pitch_discrepancy, spacing_track, PitchMethod,
    PitchTrack,
};
use crate::signal::Signal;
use crate::spectral::{frame_snapshots, link_snapshots, stft};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Decimal places kept for every float in the JSON report.
pub const FLOAT_DECIMALS: i32 = 6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StemSet {
    pub stems: BTreeMap<String, PathBuf>,
    pub segments: Option<PathBuf>,
    /// Hz or note name; overrides the config's final.
    pub final_override: Option<String>,
}

impl StemSet {
    /// Every `.wav` file in `dir`, labelled by file stem.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        paths.sort();
        let items: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
        Self::from_list(&items)
    }

    /// Items are `label=path` or a bare path labelled by its file stem.
    pub fn from_list(items: &[String]) -> Result<Self> {
        let mut stems = BTreeMap::new();
        for item in items {
            let (label, path) = match item.split_once('=') {
                Some((l, p)) => (l.trim().to_string(), PathBuf::from(p.trim())),
                None => {
                    let p = PathBuf::from(item);
                    let label = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .ok_or_else(|| Error::InvalidParameter(format!("no file name in {item:?}")))?;
                    (label, p)
                }
            };
            if stems.insert(label.clone(), path).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate stem label {label:?}")));
            }
        }
        Ok(Self {
            stems,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.stems.is_empty() {
            return Err(Error::InvalidParameter("no stems given".into()));
        }
        for path in self.stems.values().chain(self.segments.iter()) {
            if !path.is_file() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub index: usize,
    pub birth_s: f64,
    pub death_s: f64,
    pub frames: usize,
    pub mean_frequency_hz: f64,
    pub mean_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchPoint {
    pub time_s: f64,
    pub frequency_hz: Option<f64>,
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrackReport {
    pub hop_s: f64,
    pub voiced_frames: usize,
    pub frames: Vec<PitchPoint>,
}

impl PitchTrackReport {
    fn from_track(track: &PitchTrack) -> Self {
        Self {
            hop_s: track.hop_seconds,
            voiced_frames: track.voiced_count(),
            frames: track
                .frames
                .iter()
                .map(|f| PitchPoint {
                    time_s: f.time,
                    frequency_hz: f.top().map(|c| c.frequency),
                    salience: f.top().map_or(0.0, |c| c.salience),
                })
                .collect(),
        }
    }

    pub fn to_track(&self, method: PitchMethod) -> PitchTrack {
        PitchTrack::new(
            method,
            self.hop_s,
            self.frames
                .iter()
                .map(|p| crate::pitch::PitchFrame::single(p.time_s, p.frequency_hz, p.salience, method))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyPoint {
    pub time_s: f64,
    pub cents: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InharmonicityPoint {
    pub time_s: f64,
    pub f0_ref_hz: f64,
    pub max_abs_deviation_cents: f64,
    pub stretch_b: Option<f64>,
    pub stretch_residual_cents: Option<f64>,
    pub classification: Harmonicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencePoint {
    pub time_s: f64,
    pub fundamental_hz: f64,
    pub salient: Vec<usize>,
    pub carrier_centers_hz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientIndex {
    pub index: usize,
    /// Share of analysed frames in which the index was salient.
    pub frame_fraction: f64,
    pub mean_frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalReport {
    pub reference_hz: f64,
    pub poles: Vec<PoleDistribution>,
    pub residual_mass: f64,
    pub mode: Option<ModeEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub bin_frequencies_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemReport {
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub frames: usize,
    pub voiced: bool,
    pub partial_tracks: Vec<TrackSummary>,
    pub pitch_tracks: BTreeMap<PitchMethod, PitchTrackReport>,
    /// Lowest-partial minus autocorrelation pitch on frames where both are voiced.
    pub discrepancy: Vec<DiscrepancyPoint>,
    pub inharmonicity: Vec<InharmonicityPoint>,
    pub salience: Vec<SaliencePoint>,
    /// Indices salient in at least the configured share of analysed frames.
    pub salient_summary: Vec<SalientIndex>,
    pub modal: Option<ModalReport>,
    /// Why `modal` is absent.
    pub modal_note: Option<String>,
    pub tuning: Vec<SegmentOffset>,
    pub mean_spectrum: Option<SpectrumReport>,
}

impl StemReport {
    pub fn salient_set(&self) -> Vec<usize> {
        self.salient_summary.iter().map(|s| s.index).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StemOutcome {
    Ok(Box<StemReport>),
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: AnalysisConfig,
    pub segments: Option<Vec<Segment>>,
    pub inputs: BTreeMap<String, InputFile>,
    pub stems: BTreeMap<String, StemOutcome>,
    pub beat_map: Option<BeatMap>,
}

impl AnalysisReport {
    pub fn stem(&self, label: &str) -> Option<&StemReport> {
        match self.stems.get(label)? {
            StemOutcome::Ok(r) => Some(r),
            StemOutcome::Error(_) => None,
        }
    }
}

/// Runs the full pipeline on every stem. Failures are recorded per stem;
/// only unreadable shared inputs (contour, segments, final) abort.
pub fn analyze(stems: &StemSet, config: &AnalysisConfig) -> Result<AnalysisReport> {
    config.validate()?;
    let mut config = config.clone();
    if let Some(f) = &stems.final_override {
        config.final_pitch = Some(f.clone());
    }
    let final_hz = config.final_pitch.as_deref().map(parse_frequency).transpose()?;
    let contour = match (&config.weighting, &config.contour_path) {
        (false, _) => None,
        (true, Some(p)) => Some(LoudnessContour::load(Path::new(p), 50.0)?),
        (true, None) => Some(LoudnessContour::iso226_50_phon()),
    };
    let segments = stems.segments.as_deref().map(load_segments).transpose()?;

    let results: Vec<(String, Option<InputFile>, StemOutcome)> = stems
        .stems
        .par_iter()
        .map(|(label, path)| {
            let bytes = match std::fs::read(path) {
                Ok(b) => b,
                Err(e) => return (label.clone(), None, StemOutcome::Error(Error::io(path, e).to_string())),
            };
            let input = InputFile {
                path: path.display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            };
            let outcome = decode_wav(&bytes)
                .and_then(|s| analyze_signal(&s, &config, contour.as_ref(), final_hz, segments.as_deref()))
                .map_or_else(|e| StemOutcome::Error(e.to_string()), |r| StemOutcome::Ok(Box::new(r)));
            (label.clone(), Some(input), outcome)
        })
        .collect();

    let mut inputs = BTreeMap::new();
    let mut outcomes = BTreeMap::new();
    for (label, input, outcome) in results {
        if let Some(i) = input {
            inputs.insert(label.clone(), i);
        }
        outcomes.insert(label, outcome);
    }
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        config,
        segments,
        inputs,
        stems: outcomes,
        beat_map: None,
    })
}

/// Pipeline for one signal: weighted STFT, partials, the four pitch
/// tracks, harmonicity and salience per frame, then poles, mode and tuning
/// on the configured track.
pub fn analyze_signal(
    signal: &Signal,
    config: &AnalysisConfig,
    contour: Option<&LoudnessContour>,
    final_hz: Option<f64>,
    segments: Option<&[Segment]>,
) -> Result<StemReport> {
    let framing = config.framing();
    let spec = stft(signal, &framing, None)?;
    let hop_s = spec.hop_seconds();
    let mut snapshots = frame_snapshots(&spec, &config.peaks());
    if let Some(c) = contour {
        snapshots = snapshots.iter().map(|s| s.weighted(c)).collect();
    }
    let tracks = link_snapshots(&snapshots, &spec.frame_times, &config.tracking());

    let mut pitch: BTreeMap<PitchMethod, PitchTrack> = BTreeMap::new();
    pitch.insert(PitchMethod::LowestPartial, lowest_partial_track(&tracks, &spec.frame_times, hop_s));
    pitch.insert(PitchMethod::GcdF0, gcd_track(&snapshots, &spec.frame_times, hop_s, &config.gcd()));
    pitch.insert(PitchMethod::PartialSpacing, spacing_track(&snapshots, &spec.frame_times, hop_s));
    pitch.insert(PitchMethod::Autocorrelation, autocorrelation_track(signal, &framing, &config.acf())?);

    let discrepancy = pitch_discrepancy(&pitch[&PitchMethod::LowestPartial], &pitch[&PitchMethod::Autocorrelation])?
        .into_iter()
        .map(|(time_s, cents)| DiscrepancyPoint { time_s, cents })
        .collect();

    let mut inharm = Vec::new();
    let mut salience = Vec::new();
    let mut salience_reports = Vec::new();
    for (snap, &time_s) in snapshots.iter().zip(&spec.frame_times) {
        if let Ok(r) = inharmonicity(snap) {
            inharm.push(InharmonicityPoint {
                time_s,
                f0_ref_hz: r.f0_ref_hz,
                max_abs_deviation_cents: r.max_abs_deviation_cents,
                stretch_b: r.stretch.map(|s| s.b),
                stretch_residual_cents: r.stretch.map(|s| s.residual_rms_cents),
                classification: r.classification,
            });
        }
        // snapshots already carry the weighting
        let s = detect_salient_partials(snap, None, config.margin_db);
        if let Some(fundamental_hz) = s.fundamental_hz {
            salience.push(SaliencePoint {
                time_s,
                fundamental_hz,
                carrier_centers_hz: s.carriers.iter().map(|c| c.center_hz).collect(),
                salient: s.salient.clone(),
            });
            salience_reports.push(s);
        }
    }
    let salient_summary = summarise_salience(&salience_reports, config.salient_frame_fraction);

    let mode_track = &pitch[&config.mode_track];
    let voiced = mode_track.voiced_count() > 0;
    let (modal, modal_note) = if voiced {
        match modal_report(mode_track, config.fold_weighting, config.min_mass, final_hz) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("no voiced frames".to_string()))
    };
    let tuning = if voiced {
        estimate_tuning_offset(mode_track, segments)?
    } else {
        Vec::new()
    };

    Ok(StemReport {
        sample_rate_hz: signal.sample_rate(),
        duration_s: signal.duration(),
        frames: spec.frame_count(),
        voiced,
        partial_tracks: tracks
            .iter()
            .map(|t| TrackSummary {
                index: t.index,
                birth_s: spec.frame_times[t.birth_frame()],
                death_s: spec.frame_times[t.death_frame()],
                frames: t.len(),
                mean_frequency_hz: t.mean_frequency(),
                mean_magnitude: t.mean_magnitude(),
            })
            .collect(),
        pitch_tracks: pitch.iter().map(|(m, t)| (*m, PitchTrackReport::from_track(t))).collect(),
        discrepancy,
        inharmonicity: inharm,
        salience,
        salient_summary,
        modal,
        modal_note,
        tuning,
        mean_spectrum: config.include_spectrum.then(|| SpectrumReport {
            bin_frequencies_hz: spec.bin_frequencies.clone(),
            magnitudes: spec
                .mean_spectrum()
                .iter()
                .zip(&spec.bin_frequencies)
                .map(|(m, &f)| contour.map_or(*m, |c| m * c.gain(f)))
                .collect(),
        }),
    })
}

/// Indices salient in at least `min_fraction` of the frames that had a
/// fundamental.
fn summarise_salience(reports: &[SalienceReport], min_fraction: f64) -> Vec<SalientIndex> {
    let mut counts: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for s in reports {
        for p in s.salient_partials() {
            let e = counts.entry(p.index).or_default();
            e.0 += 1;
            e.1 += p.frequency_hz;
        }
    }
    let frames = reports.len();
    counts
        .into_iter()
        .map(|(index, (n, sum))| SalientIndex {
            index,
            frame_fraction: n as f64 / frames as f64,
            mean_frequency_hz: sum / n as f64,
        })
        .filter(|s| s.frame_fraction >= min_fraction)
        .collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Folds relative to the given final, or to half an octave below the
/// track's median so poles come out in the register the track occupies.
pub fn modal_report(
    track: &PitchTrack,
    weighting: FoldWeighting,
    min_mass: f64,
    final_hz: Option<f64>,
) -> Result<ModalReport> {
    let (reference, selection) = match final_hz {
        Some(f) => (f, FinalSelection::Nearest(0.0)),
        None => {
            let voiced: Vec<f64> = track.frames.iter().filter_map(|f| f.top()).map(|c| c.frequency).collect();
            let m = median(voiced).ok_or(Error::EmptyTrack)?;
            (transpose(m, -600.0), FinalSelection::HighestMass)
        }
    };
    let folded = fold_to_pitch_classes(track, reference, weighting)?;
    let analysis = estimate_poles(&folded, min_mass)?;
    let mode = infer_mode(&analysis.poles, selection, min_mass);
    Ok(ModalReport {
        reference_hz: reference,
        poles: analysis.poles,
        residual_mass: analysis.residual_mass,
        mode,
    })
}

fn round_floats(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            let scale = 10f64.powi(FLOAT_DECIMALS);
            let r = (x * scale).round() / scale;
            // -0.0 and 0.0 print differently
            let r = if r == 0.0 { 0.0 } else { r };
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_floats),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with sorted keys and floats rounded to [`FLOAT_DECIMALS`]
/// places, so equal reports serialise to equal bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}
