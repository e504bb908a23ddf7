use std::path::Path;
use std::process::{Command, Output};

use pitchhaze::io::load_wav;
use pitchhaze::synth::{ComplexToneSpec, SynthDocument};

fn pitchhaze(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pitchhaze")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn boom_doc(dir: &Path) -> String {
    let doc = SynthDocument::ComplexTone(ComplexToneSpec::bass_analogue(61.0, 12, &[(5, 20.0)], 3.0));
    let p = dir.join("boom.json");
    std::fs::write(&p, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    p.display().to_string()
}

fn render_boom(dir: &Path) -> String {
    let wav = dir.join("boom.wav").display().to_string();
    let o = pitchhaze(&["synth", &boom_doc(dir), "--out", &wav]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    wav
}

#[test]
fn synth_writes_a_wav() {
    let dir = tempfile::tempdir().unwrap();
    let wav = render_boom(dir.path());
    let s = load_wav(Path::new(&wav)).unwrap();
    assert_eq!(s.sample_rate(), 48_000);
    assert_eq!(s.len(), 144_000);
}

#[test]
fn analyze_then_plot_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let wav = render_boom(dir.path());
    let report = dir.path().join("report.json").display().to_string();
    let tracks = dir.path().display().to_string();
    let o = pitchhaze(&[
        "analyze",
        "--stem",
        &format!("boom={wav}"),
        "--tracks-dir",
        &tracks,
        "--out",
        &report,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let summary = &v["stems"]["boom"]["ok"]["salient_summary"];
    assert_eq!(summary[0]["index"], 5);
    assert_eq!(summary.as_array().unwrap().len(), 1);

    let o = pitchhaze(&["plot", "--report", &report, "--kind", "pitch_track"]);
    assert_eq!(code(&o), 0);
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("stem,method,time_s,frequency_hz,salience"));

    let o = pitchhaze(&["plot", "--report", &report, "--kind", "spectrum"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("pitch_track"), "{err}");

    let track_csv = dir.path().join("boom.csv").display().to_string();
    let o = pitchhaze(&["mode", "--track", &track_csv, "--final", "61"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["mode"]["degrees"][0]["label"], "C");
}

#[test]
fn beatmap_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("map.csv");
    let o = pitchhaze(&[
        "beatmap",
        "--out",
        out.to_str().unwrap(),
        "--min-st",
        "6.5",
        "--max-st",
        "7.5",
        "--seed",
        "7",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("interval_st,"));
    assert_eq!(csv.lines().count(), 22);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(side["seed"], 7);
    assert_eq!(side["rows"], 21);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&pitchhaze(&[])), 1);
    assert_eq!(code(&pitchhaze(&["analyze", "--bogus"])), 1);
    assert_eq!(code(&pitchhaze(&["--help"])), 0);
    assert_eq!(code(&pitchhaze(&["analyze", "--stem", "/nonexistent/x.wav"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let wav = render_boom(dir.path());
    assert_eq!(code(&pitchhaze(&["analyze", "--stem", &wav, "--final", "H9"])), 1);

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"kind\":\"nope\"}").unwrap();
    let out = dir.path().join("x.wav").display().to_string();
    assert_eq!(code(&pitchhaze(&["synth", junk.to_str().unwrap(), "--out", &out])), 2);

    let high = SynthDocument::ComplexTone(ComplexToneSpec::sine(30_000.0, 0.5, 0.1));
    let high_path = dir.path().join("high.json");
    std::fs::write(&high_path, serde_json::to_string(&high).unwrap()).unwrap();
    let o = pitchhaze(&["synth", high_path.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 2);
}
