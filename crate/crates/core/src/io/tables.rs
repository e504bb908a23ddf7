//! CSV tables: segments and pitch tracks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modal::{validate_segments, Segment};
use crate::pitch::{PitchFrame, PitchMethod, PitchTrack};

#[derive(Debug, Deserialize)]
struct SegmentRow {
    start_s: f64,
    end_s: f64,
    label: String,
}

/// Reads a `start_s,end_s,label` file.
pub fn load_segments(path: &Path) -> Result<Vec<Segment>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_segments(file)
}

pub fn read_segments(reader: impl std::io::Read) -> Result<Vec<Segment>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let segments = rdr
        .deserialize::<SegmentRow>()
        .map(|r| r.map(|r| Segment::new(r.start_s, r.end_s, r.label)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    validate_segments(&segments)?;
    Ok(segments)
}

/// One row of the pitch-track table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchRow {
    pub time_s: f64,
    pub frequency_hz: Option<f64>,
    pub salience: f64,
    pub method: PitchMethod,
    pub voiced: bool,
}

pub fn pitch_rows(track: &PitchTrack) -> impl Iterator<Item = PitchRow> + '_ {
    track.frames.iter().map(move |f| PitchRow {
        time_s: f.time,
        frequency_hz: f.top().map(|c| c.frequency),
        salience: f.top().map_or(0.0, |c| c.salience),
        method: track.method,
        voiced: f.is_voiced(),
    })
}

pub fn write_pitch_tracks<'a>(
    writer: impl std::io::Write,
    tracks: impl IntoIterator<Item = &'a PitchTrack>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for track in tracks {
        for row in pitch_rows(track) {
            w.serialize(row)?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Reads a pitch-track table back, one track per method present. The hop
/// is taken from the spacing of the first two frames.
pub fn read_pitch_tracks(reader: impl std::io::Read) -> Result<BTreeMap<PitchMethod, PitchTrack>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut frames: BTreeMap<PitchMethod, Vec<PitchFrame>> = BTreeMap::new();
    for row in rdr.deserialize::<PitchRow>() {
        let row = row?;
        let freq = if row.voiced { row.frequency_hz } else { None };
        frames
            .entry(row.method)
            .or_default()
            .push(PitchFrame::single(row.time_s, freq, row.salience, row.method));
    }
    Ok(frames
        .into_iter()
        .map(|(method, frames)| {
            let hop = match frames.as_slice() {
                [a, b, ..] => b.time - a.time,
                _ => 0.0,
            };
            (method, PitchTrack::new(method, hop, frames))
        })
        .collect())
}

pub fn load_pitch_tracks(path: &Path) -> Result<BTreeMap<PitchMethod, PitchTrack>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pitch_tracks(file)
}
