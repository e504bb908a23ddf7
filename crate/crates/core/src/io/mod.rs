//! File formats, configuration and the end-to-end analysis report.

pub mod config;
pub mod note;
pub mod plot;
pub mod report;
pub mod tables;
pub mod wav;

pub use config::AnalysisConfig;
pub use note::{parse_frequency, parse_note};
pub use plot::{available_plot_kinds, beat_map_csv, beat_map_sidecar, plot_data, BeatMapSidecar, PlotKind};
pub use report::{analyze, analyze_signal, modal_report, ModalReport, to_canonical_json, AnalysisReport, StemOutcome, StemReport, StemSet};
pub use tables::{load_pitch_tracks, load_segments, read_pitch_tracks, read_segments, write_pitch_tracks};
pub use wav::{decode_wav, encode_wav, load_wav, save_wav, WavFormat};
