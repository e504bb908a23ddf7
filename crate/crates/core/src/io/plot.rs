//! Plot-ready CSV extracted from an analysis report or a beat map.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::{AnalysisReport, StemOutcome};
use crate::beatmap::{find_beat_minima, BeatMap, BeatMapParams, BeatMinimum};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Spectrum,
    PitchTrack,
    Histogram,
    Beatmap,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::Spectrum,
        PlotKind::PitchTrack,
        PlotKind::Histogram,
        PlotKind::Beatmap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::Spectrum => "spectrum",
            PlotKind::PitchTrack => "pitch_track",
            PlotKind::Histogram => "histogram",
            PlotKind::Beatmap => "beatmap",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::PlotKindUnavailable {
                requested: s.to_string(),
                available: PlotKind::ALL.iter().map(|k| k.to_string()).collect(),
            })
    }
}

fn ok_stems(report: &AnalysisReport) -> impl Iterator<Item = (&String, &super::report::StemReport)> {
    report.stems.iter().filter_map(|(l, o)| match o {
        StemOutcome::Ok(r) => Some((l, r.as_ref())),
        StemOutcome::Error(_) => None,
    })
}

/// Kinds the report holds data for.
pub fn available_plot_kinds(report: &AnalysisReport) -> Vec<PlotKind> {
    let mut kinds = Vec::new();
    if ok_stems(report).any(|(_, s)| s.mean_spectrum.is_some()) {
        kinds.push(PlotKind::Spectrum);
    }
    if ok_stems(report).next().is_some() {
        kinds.push(PlotKind::PitchTrack);
    }
    if ok_stems(report).any(|(_, s)| s.modal.is_some()) {
        kinds.push(PlotKind::Histogram);
    }
    if report.beat_map.is_some() {
        kinds.push(PlotKind::Beatmap);
    }
    kinds
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// CSV for one plot kind. Asking for a kind the report has no data for is
/// an error naming the kinds it does have.
pub fn plot_data(report: &AnalysisReport, kind: PlotKind) -> Result<String> {
    let available = available_plot_kinds(report);
    if !available.contains(&kind) {
        return Err(Error::PlotKindUnavailable {
            requested: kind.to_string(),
            available: available.iter().map(|k| k.to_string()).collect(),
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    match kind {
        PlotKind::Spectrum => {
            w.write_record(["stem", "frequency_hz", "magnitude"])?;
            for (label, stem) in ok_stems(report) {
                let Some(spec) = &stem.mean_spectrum else { continue };
                for (f, m) in spec.bin_frequencies_hz.iter().zip(&spec.magnitudes) {
                    w.write_record([label.clone(), f.to_string(), m.to_string()])?;
                }
            }
        }
        PlotKind::PitchTrack => {
            w.write_record(["stem", "method", "time_s", "frequency_hz", "salience"])?;
            for (label, stem) in ok_stems(report) {
                for (method, track) in &stem.pitch_tracks {
                    for p in &track.frames {
                        w.write_record([
                            label.clone(),
                            method.to_string(),
                            p.time_s.to_string(),
                            cell(p.frequency_hz),
                            p.salience.to_string(),
                        ])?;
                    }
                }
            }
        }
        PlotKind::Histogram => {
            w.write_record(["stem", "pole_cents", "pole_hz", "cents_bin", "count"])?;
            for (label, stem) in ok_stems(report) {
                let Some(modal) = &stem.modal else { continue };
                for pole in &modal.poles {
                    for bin in &pole.histogram {
                        w.write_record([
                            label.clone(),
                            pole.pole_cents.to_string(),
                            pole.pole_hz.to_string(),
                            bin.cents_bin.to_string(),
                            bin.count.to_string(),
                        ])?;
                    }
                }
            }
        }
        PlotKind::Beatmap => {
            if let Some(map) = &report.beat_map {
                return beat_map_csv(map);
            }
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Matrix CSV: header row holds the beat frequencies, first column the
/// interval in semitones.
pub fn beat_map_csv(map: &BeatMap) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("interval_st".to_string())
        .chain(map.beat_frequencies_hz.iter().map(|f| f.to_string()));
    w.write_record(header)?;
    for (iv, row) in map.intervals_st.iter().zip(&map.matrix) {
        let rec = std::iter::once(iv.to_string()).chain(row.iter().map(|m| m.to_string()));
        w.write_record(rec)?;
    }
    finish(w)
}

/// Recipe written next to a beat-map CSV so it can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatMapSidecar {
    pub tool_version: String,
    pub params: BeatMapParams,
    pub seed: u64,
    pub rows: usize,
    pub columns: usize,
    pub minima: Vec<SidecarMinimum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarMinimum {
    pub interval_st: f64,
    pub energy: f64,
    pub ratio: Option<String>,
}

impl From<&BeatMinimum> for SidecarMinimum {
    fn from(m: &BeatMinimum) -> Self {
        Self {
            interval_st: m.interval_st,
            energy: m.energy,
            ratio: m.ratio.map(|r| r.to_string()),
        }
    }
}

pub fn beat_map_sidecar(map: &BeatMap) -> BeatMapSidecar {
    BeatMapSidecar {
        tool_version: super::report::TOOL_VERSION.to_string(),
        params: map.params,
        seed: map.params.seed,
        rows: map.intervals_st.len(),
        columns: map.beat_frequencies_hz.len(),
        minima: find_beat_minima(map).iter().map(SidecarMinimum::from).collect(),
    }
}
