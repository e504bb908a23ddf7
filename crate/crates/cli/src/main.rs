use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pitchhaze::beatmap::{compute_beat_map, BeatMapParams};
use pitchhaze::io::{
    analyze, beat_map_csv, beat_map_sidecar, load_pitch_tracks, modal_report, parse_frequency, plot_data, save_wav,
    to_canonical_json, write_pitch_tracks, AnalysisConfig, AnalysisReport, PlotKind, StemOutcome, StemSet, WavFormat,
};
use pitchhaze::modal::FoldWeighting;
use pitchhaze::pitch::PitchMethod;
use pitchhaze::synth::SynthDocument;
use pitchhaze::Error;

#[derive(Parser)]
#[command(name = "pitchhaze", version, about = "Pitch analysis and synthesis for bass-heavy stems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse WAV stems and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Render a JSON synthesis document to WAV.
    Synth(SynthArgs),
    /// Compute a beat map and write it as CSV with a JSON sidecar.
    Beatmap(BeatmapArgs),
    /// Poles and mode of a pitch-track CSV.
    Mode(ModeArgs),
    /// Extract plot data from a saved report.
    Plot(PlotArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Analyse every .wav file in this directory.
    #[arg(long, conflicts_with = "stem")]
    stems_dir: Option<PathBuf>,
    /// `label=path` or a bare path; repeatable.
    #[arg(long, required_unless_present = "stems_dir")]
    stem: Vec<String>,
    /// TOML analysis configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV of start_s,end_s,label rows for per-segment tuning.
    #[arg(long)]
    segments: Option<PathBuf>,
    /// Final as Hz or note name (e.g. E2+41c).
    #[arg(long = "final")]
    final_pitch: Option<String>,
    /// Keep the mean spectrum of each stem in the report.
    #[arg(long)]
    include_spectrum: bool,
    /// Attach the default beat map to the report.
    #[arg(long)]
    with_beatmap: bool,
    /// Also write each stem's pitch tracks to `<dir>/<label>.csv`.
    #[arg(long)]
    tracks_dir: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synthesis document.
    doc: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 48_000)]
    sample_rate: u32,
    /// pcm16, pcm24 or float32.
    #[arg(long, default_value = "float32")]
    format: WavFormat,
}

#[derive(Args)]
struct BeatmapArgs {
    /// CSV path; the sidecar is written next to it with a .json extension.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    base_f0: Option<f64>,
    #[arg(long)]
    partials: Option<usize>,
    #[arg(long)]
    min_st: Option<f64>,
    #[arg(long)]
    max_st: Option<f64>,
    #[arg(long)]
    step_st: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ModeArgs {
    /// Pitch-track CSV as written by analyze or by hand.
    #[arg(long)]
    track: PathBuf,
    /// Final as Hz or note name; the highest-mass pole otherwise.
    #[arg(long = "final")]
    final_pitch: Option<String>,
    #[arg(long, default_value = "lowest_partial")]
    method: PitchMethod,
    #[arg(long, default_value_t = pitchhaze::modal::DEFAULT_MIN_MASS)]
    min_mass: f64,
    /// Weight every voiced frame equally.
    #[arg(long)]
    uniform: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Report JSON written by analyze.
    #[arg(long)]
    report: PathBuf,
    /// spectrum, pitch_track, histogram or beatmap.
    #[arg(long)]
    kind: String,
    /// CSV path; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Input(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParameter(_) | Error::Config(_) | Error::InvalidNote(_) => Failure::Usage(msg),
            Error::Io { .. }
            | Error::UnsupportedFormat(_)
            | Error::Truncated { .. }
            | Error::MalformedWav { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::InvalidSegments(_)
            | Error::PlotKindUnavailable { .. }
            | Error::AboveNyquist { .. }
            | Error::NyquistAtInterval { .. }
            | Error::EmptyInput
            | Error::EmptyTrack
            | Error::InsufficientObservations { .. }
            | Error::NonFiniteSample(_)
            | Error::InvalidSampleRate(_) => Failure::Input(msg),
            _ => Failure::Internal(msg),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn write_output(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_analyze(args: AnalyzeArgs) -> CliResult {
    let mut stems = match &args.stems_dir {
        Some(dir) => StemSet::from_dir(dir)?,
        None => StemSet::from_list(&args.stem)?,
    };
    stems.segments = args.segments;
    stems.final_override = args.final_pitch;
    stems.validate()?;
    let mut config = match &args.config {
        Some(p) => AnalysisConfig::load(p)?,
        None => AnalysisConfig::default(),
    };
    config.include_spectrum |= args.include_spectrum;
    let mut report = analyze(&stems, &config)?;
    if args.with_beatmap {
        report.beat_map = Some(compute_beat_map(&BeatMapParams::default())?);
    }
    for (label, outcome) in &report.stems {
        match outcome {
            StemOutcome::Error(e) => eprintln!("warning: stem {label}: {e}"),
            StemOutcome::Ok(stem) => {
                if let Some(dir) = &args.tracks_dir {
                    let tracks: Vec<_> = stem.pitch_tracks.iter().map(|(m, t)| t.to_track(*m)).collect();
                    let path = dir.join(format!("{label}.csv"));
                    let file = fs::File::create(&path)
                        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
                    write_pitch_tracks(file, &tracks)?;
                }
            }
        }
    }
    write_output(args.out.as_deref(), &to_canonical_json(&report)?)
}

fn run_synth(args: SynthArgs) -> CliResult {
    let text = fs::read_to_string(&args.doc).map_err(|e| Failure::Input(format!("{}: {e}", args.doc.display())))?;
    let doc: SynthDocument = serde_json::from_str(&text).map_err(Error::from)?;
    let signal = doc.render(args.sample_rate)?;
    save_wav(&args.out, &signal, args.format)?;
    Ok(())
}

fn run_beatmap(args: BeatmapArgs) -> CliResult {
    let d = BeatMapParams::default();
    let params = BeatMapParams {
        base_f0: args.base_f0.unwrap_or(d.base_f0),
        partials_per_tone: args.partials.unwrap_or(d.partials_per_tone),
        interval_min_st: args.min_st.unwrap_or(d.interval_min_st),
        interval_max_st: args.max_st.unwrap_or(d.interval_max_st),
        step_st: args.step_st.unwrap_or(d.step_st),
        seed: args.seed.unwrap_or(d.seed),
        ..d
    };
    let map = compute_beat_map(&params)?;
    write_output(Some(&args.out), &beat_map_csv(&map)?)?;
    let sidecar = args.out.with_extension("json");
    write_output(Some(&sidecar), &to_canonical_json(&beat_map_sidecar(&map))?)
}

fn run_mode(args: ModeArgs) -> CliResult {
    let tracks = load_pitch_tracks(&args.track)?;
    let track = tracks
        .get(&args.method)
        .ok_or_else(|| Failure::Input(format!("{} has no {} track", args.track.display(), args.method)))?;
    let final_hz = args.final_pitch.as_deref().map(parse_frequency).transpose()?;
    let weighting = if args.uniform {
        FoldWeighting::Uniform
    } else {
        FoldWeighting::Salience
    };
    let report = modal_report(track, weighting, args.min_mass, final_hz)?;
    write_output(None, &to_canonical_json(&report)?)
}

fn run_plot(args: PlotArgs) -> CliResult {
    let text =
        fs::read_to_string(&args.report).map_err(|e| Failure::Input(format!("{}: {e}", args.report.display())))?;
    let report: AnalysisReport = serde_json::from_str(&text).map_err(Error::from)?;
    let kind: PlotKind = args.kind.parse()?;
    write_output(args.out.as_deref(), &plot_data(&report, kind)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Synth(a) => run_synth(a),
        Command::Beatmap(a) => run_beatmap(a),
        Command::Mode(a) => run_mode(a),
        Command::Plot(a) => run_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}
