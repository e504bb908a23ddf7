use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("invalid hop: {hop} (frame length {frame_length})")]
    InvalidHop { hop: usize, frame_length: usize },

    #[error("invalid frame length: {0}")]
    InvalidFrameLength(usize),

    #[error("invalid sample rate: {0}")]
    InvalidSampleRate(u32),

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("degenerate contour: {0}")]
    DegenerateContour(String),

    #[error("frame shorter than 2/min_freq: {len} samples, need {required}")]
    FrameTooShort { len: usize, required: usize },

    #[error("frame grids differ: {0}")]
    GridMismatch(String),

    #[error("insufficient partials: {found} (need {required})")]
    InsufficientPartials { found: usize, required: usize },

    #[error("empty track")]
    EmptyTrack,

    #[error("insufficient observations: {found} (need {required})")]
    InsufficientObservations { found: usize, required: usize },

    #[error("invalid segments: {0}")]
    InvalidSegments(String),

    #[error("partials at or above Nyquist ({nyquist} Hz): {offending:?}")]
    AboveNyquist { nyquist: f64, offending: Vec<f64> },

    #[error("interval {interval_st} semitones puts a partial at {frequency_hz} Hz, at or above Nyquist ({nyquist} Hz)")]
    NyquistAtInterval { interval_st: f64, frequency_hz: f64, nyquist: f64 },

    #[error("signal mismatch: {0}")]
    SignalMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("truncated file at byte offset {offset}: {detail}")]
    Truncated { offset: u64, detail: String },

    #[error("malformed WAV at byte offset {offset}: {detail}")]
    MalformedWav { offset: u64, detail: String },

    #[error("invalid note name: {0:?}")]
    InvalidNote(String),

    #[error("plot kind {requested:?} not available; available kinds: {available:?}")]
    PlotKindUnavailable { requested: String, available: Vec<String> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
