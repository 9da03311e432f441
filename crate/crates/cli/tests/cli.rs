use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use stereo_aware::wav::{self, SampleFormat};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stereo-aware"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tone(len: usize, f: f64, phase: f64) -> Vec<f64> {
    (0..len)
        .map(|i| 0.3 * (2.0 * std::f64::consts::PI * f * i as f64 / 48_000.0 + phase).sin() + 0.01 * ((i * 7919) % 13) as f64)
        .collect()
}

/// Deterministic white noise in [-0.5, 0.5).
fn noise(len: usize, mut state: u64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn write_wav(path: &Path, channels: &[Vec<f64>]) {
    let ch: Vec<&[f64]> = channels.iter().map(|c| c.as_slice()).collect();
    wav::write(path, &ch, 48_000, SampleFormat::Float32).unwrap();
}

#[test]
fn zero_scenes_give_an_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus");
    let o = run(&["synth", "--scenes", "0", "--seed", "1", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(out.join("manifest.jsonl")).unwrap(), b"");
}

#[test]
fn same_seed_gives_identical_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["synth", "--scenes", "3", "--seed", "9", "--duration", "0.25", "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ma = std::fs::read(a.join("manifest.jsonl")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("manifest.jsonl")).unwrap());
    assert_eq!(String::from_utf8(ma).unwrap().lines().count(), 3);
    let mix = |d: &Path| std::fs::read(d.join("scene00002/mix.wav")).unwrap();
    assert_eq!(mix(&a), mix(&b));
}

#[test]
fn oracle_beats_noisy_on_synthesized_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus");
    let o = run(&["synth", "--scenes", "50", "--seed", "3", "--duration", "1", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    let o = run(&[
        "eval",
        "--manifest",
        p(&out.join("manifest.jsonl")),
        "--oracle",
        "--out",
        p(&report),
        "--csv",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 100);
    let mean = |m: &str| {
        let v: Vec<f64> = rows.iter().filter(|r| r["method"] == m).map(|r| r["sdr_mean"].as_f64().unwrap()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean("oracle") > mean("noisy"), "{} vs {}", mean("oracle"), mean("noisy"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 101);
}

#[test]
fn identical_channels_have_zero_iid_and_unit_coherence() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("same.wav");
    let x = noise(24_000, 0x9e37_79b9_7f4a_7c15);
    write_wav(&input, &[x.clone(), x]);
    let json = dir.path().join("params.json");
    let o = run(&["analyze", p(&input), "--ref", p(&input), "--bands", "16", "--json", p(&json)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(doc["bands"], 16);
    let all = |key: &str| -> Vec<f64> {
        doc[key].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap().iter().map(|v| v.as_f64().unwrap())).collect()
    };
    assert!(all("iid_db").iter().all(|v| *v == 0.0));
    assert!(all("ipd_rad").iter().all(|v| *v == 0.0));
    assert!(all("ic").iter().all(|v| (v - 1.0).abs() < 1e-6));
    for ch in doc["opd_rad"].as_array().unwrap() {
        for row in ch.as_array().unwrap() {
            assert!(row.as_array().unwrap().iter().all(|v| v.as_f64().unwrap() == 0.0));
        }
    }
}

#[test]
fn analyze_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.wav");
    write_wav(&input, &[tone(9_600, 300.0, 0.0), tone(9_600, 300.0, 0.5)]);
    let csv = dir.path().join("x.csv");
    let o = run(&["analyze", p(&input), "--bands", "8", "--csv", p(&csv)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("frame,band,iid_db,ipd_rad,ic"));
    // 21 frames of 8 bands plus the header.
    assert_eq!(text.lines().count(), 21 * 8 + 1);
}

#[test]
fn malformed_header_exits_1_and_names_the_offset() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.wav");
    std::fs::write(&input, b"RIFX\x24\x00\x00\x00WAVE").unwrap();
    let o = run(&["analyze", p(&input)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte offset 0"));
}

#[test]
fn missing_file_exits_1() {
    let o = run(&["analyze", "/nonexistent/x.wav"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn mono_input_needs_upmix() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("mono.wav");
    write_wav(&input, &[tone(4_800, 200.0, 0.0)]);
    let o = run(&["analyze", p(&input)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--upmix"));
    let o = run(&["analyze", p(&input), "--upmix"]);
    assert!(o.status.success());
}

#[test]
fn bands_must_divide_the_bin_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.wav");
    write_wav(&input, &[tone(4_800, 200.0, 0.0), tone(4_800, 250.0, 0.0)]);
    assert_eq!(run(&["analyze", p(&input), "--bands", "3"]).status.code(), Some(2));
}

#[test]
fn unknown_flag_is_rejected() {
    assert_eq!(run(&["analyze", "x.wav", "--frobnicate"]).status.code(), Some(2));
}

#[test]
fn loss_of_reference_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.wav");
    write_wav(&input, &[tone(12_000, 200.0, 0.0), tone(12_000, 250.0, 1.0)]);
    let o = run(&["loss", p(&input), p(&input)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["lsd", "tl", "l_iid", "l_ipd", "l_ic", "l_opd", "total"] {
        assert_eq!(doc["breakdown"][key], 0.0, "{key}");
    }
    let w = &doc["weights"];
    assert_eq!(
        [&w["alpha_tl"], &w["alpha_iid"], &w["alpha_ipd"], &w["alpha_ic"], &w["alpha_opd"]].map(|v| v.as_f64().unwrap()),
        [50.0, 0.05, 0.05, 0.4, 0.05]
    );
}

#[test]
fn loss_rejects_lengths_more_than_a_hop_apart() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.wav"), dir.path().join("b.wav"), dir.path().join("c.wav"));
    write_wav(&a, &[tone(12_000, 200.0, 0.0), tone(12_000, 250.0, 0.0)]);
    write_wav(&b, &[tone(12_400, 200.0, 0.1), tone(12_400, 250.0, 0.0)]);
    write_wav(&c, &[tone(12_481, 200.0, 0.1), tone(12_481, 250.0, 0.0)]);
    assert!(run(&["loss", p(&a), p(&b)]).status.success());
    assert_eq!(run(&["loss", p(&a), p(&c)]).status.code(), Some(2));
}

#[test]
fn loss_reads_a_config_and_runs_the_gradient_check() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
    write_wav(&a, &[tone(1_200, 700.0, 0.0), tone(1_200, 900.0, 0.3)]);
    write_wav(&b, &[tone(1_200, 710.0, 0.2), tone(1_200, 880.0, 0.0)]);
    let cfg = dir.path().join("loss.json");
    std::fs::write(&cfg, r#"{"stft": {"window_len": 256, "hop": 64}, "bins_per_band": 32}"#).unwrap();
    let o = run(&["loss", p(&a), p(&b), "--config", p(&cfg), "--grad-check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let g = &doc["grad_check"];
    assert_eq!(g["segment_samples"], 256 + 4 * 64);
    assert!(g["max_rel_error"].as_f64().unwrap().is_finite());

    std::fs::write(&cfg, r#"{"bins_per_band": 3}"#).unwrap();
    assert_eq!(run(&["loss", p(&a), p(&b), "--config", p(&cfg)]).status.code(), Some(2));
}

#[test]
fn eval_exits_3_when_every_estimate_is_missing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus");
    assert!(run(&["synth", "--scenes", "2", "--duration", "0.5", "--out", p(&out)]).status.success());
    let empty = dir.path().join("estimates");
    std::fs::create_dir(&empty).unwrap();
    let o = run(&["eval", "--manifest", p(&out.join("manifest.jsonl")), "--est", p(&empty)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scene00000"));
}

#[test]
fn eval_of_an_empty_manifest_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("manifest.jsonl");
    std::fs::write(&m, "").unwrap();
    let report = dir.path().join("r.json");
    let o = run(&["eval", "--manifest", p(&m), "--oracle", "--out", p(&report)]);
    assert!(o.status.success());
    let doc: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn synth_into_an_unwritable_location_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let o = run(&["synth", "--scenes", "1", "--out", p(&file.join("sub"))]);
    assert_eq!(o.status.code(), Some(1));
}
