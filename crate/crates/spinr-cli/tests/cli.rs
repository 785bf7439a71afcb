//! End-to-end tests of the `spinr` binary: every subcommand runs against real
//! files in a temp dir, and exit codes / artifacts / replay fidelity are
//! checked the way a shell user would see them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn spinr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = spinr(dir, args);
    assert!(
        out.status.success(),
        "spinr {args:?} failed:\n{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    spinr(dir, args).status.code().expect("exit code")
}

/// Workspace with one 16x16 synthetic image, shared setup for most tests.
fn with_image() -> (TempDir, PathBuf) {
    let tmp = TempDir::new().expect("tempdir");
    ok(tmp.path(), &["synth", "--size", "16x16", "--variant", "1", "--grain", "0.05", "--out", "img.ppm"]);
    let img = tmp.path().join("img.ppm");
    assert!(img.is_file());
    (tmp, img)
}

fn tiny_fit(dir: &Path, extra: &[&str]) {
    let mut args = vec!["fit", "--image", "img.ppm"];
    args.extend_from_slice(extra);
    for pair in [
        ["--width", "8"],
        ["--depth", "2"],
        ["--steps", "20"],
        ["--out-dir", "run"],
    ] {
        if !extra.contains(&pair[0]) {
            args.extend_from_slice(&pair);
        }
    }
    ok(dir, &args);
}

#[test]
fn synth_writes_p6_and_manifest() {
    let (tmp, img) = with_image();
    let bytes = fs::read(&img).unwrap();
    assert!(bytes.starts_with(b"P6"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("img_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["outputs"][0], "img.ppm");
}

#[test]
fn fit_multi_seed_writes_reports_renders_and_manifests() {
    let (tmp, _) = with_image();
    tiny_fit(tmp.path(), &["--seeds", "2"]);
    let run = tmp.path().join("run");
    for name in [
        "fit_s0.spnr",
        "fit_s1.spnr",
        "fit_s0_render.ppm",
        "fit_s0_loss.jsonl",
        "fit_s0_manifest.json",
        "fit_summary.jsonl",
        "fit_table.txt",
        "fit_manifest.json",
    ] {
        assert!(run.join(name).is_file(), "missing {name}");
    }
    let summary = fs::read_to_string(run.join("fit_summary.jsonl")).unwrap();
    let records: Vec<serde_json::Value> =
        summary.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["seed"], 0);
    assert_eq!(records[1]["seed"], 1);
    assert_eq!(records[0]["params"], 195); // 8-wide, 2 hidden layers, rgb out
    assert!(records[0]["psnr"].as_f64().unwrap() > 0.0);
    // Multi-seed tables end with an aggregate row.
    let table = fs::read_to_string(run.join("fit_table.txt")).unwrap();
    assert!(table.contains("mean ± std"));
}

#[test]
fn fit_replay_argv_reproduces_the_bitstream_exactly() {
    let (tmp, _) = with_image();
    tiny_fit(tmp.path(), &["--seeds", "1", "--seed-base", "3"]);
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("run/fit_s3_manifest.json")).unwrap(),
    )
    .unwrap();
    let mut argv: Vec<String> = manifest["replay"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let pos = argv.iter().position(|a| a == "--out-dir").unwrap();
    argv[pos + 1] = "replayed".into();
    let args: Vec<&str> = argv.iter().map(String::as_str).collect();
    ok(tmp.path(), &args);
    let original = fs::read(tmp.path().join("run/fit_s3.spnr")).unwrap();
    let replayed = fs::read(tmp.path().join("replayed/fit_s3.spnr")).unwrap();
    assert_eq!(original, replayed, "replay must be bit-identical");
}

#[test]
fn staged_fit_writes_one_render_per_stage() {
    let (tmp, _) = with_image();
    tiny_fit(tmp.path(), &["--method", "spinr", "--steps", "30"]);
    let run = tmp.path().join("run");
    // depth 2 => stages {L0,out}, {L1}, {L2}.
    for name in ["fit_s0_stage1.ppm", "fit_s0_stage2.ppm", "fit_s0_stage3.ppm"] {
        assert!(run.join(name).is_file(), "missing {name}");
    }
    assert!(!run.join("fit_s0_stage4.ppm").exists());
    let summary = fs::read_to_string(run.join("fit_summary.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(summary.lines().next().unwrap()).unwrap();
    assert_eq!(record["stage_psnr"].as_array().unwrap().len(), 3);
}

#[test]
fn attack_reports_match_the_clean_baseline_at_zero_noise() {
    let (tmp, _) = with_image();
    tiny_fit(tmp.path(), &[]);
    ok(
        tmp.path(),
        &[
            "attack", "--bitstream", "run/fit_s0.spnr", "--image", "img.ppm",
            "--noise-sigma", "0", "--lose-neurons", "1", "--trials", "3",
            "--out-dir", "atk",
        ],
    );
    let report = fs::read_to_string(tmp.path().join("atk/attack_report.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> =
        report.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let noise = rows.iter().find(|r| r["kind"] == "noise-sigma").unwrap();
    let (mean, base) = (
        noise["mean_psnr"].as_f64().unwrap(),
        noise["base_psnr"].as_f64().unwrap(),
    );
    // Trial aggregation may differ from the single baseline by rounding only.
    assert!((mean - base).abs() < 1e-9, "sigma 0 must echo the baseline: {mean} vs {base}");
    assert!(tmp.path().join("atk/attack_table.txt").is_file());
    assert!(tmp.path().join("atk/attack_manifest.json").is_file());
}

#[test]
fn lossless_stream_decodes_every_stage_and_matches_decode() {
    let (tmp, _) = with_image();
    tiny_fit(tmp.path(), &[]);
    let out = ok(
        tmp.path(),
        &[
            "stream", "--bitstream", "run/fit_s0.spnr", "--image", "img.ppm",
            "--loss-prob", "0", "--packet-size", "64", "--out-dir", "str",
        ],
    );
    assert!(out.contains("decoded through stage 3"));
    ok(
        tmp.path(),
        &["decode", "--bitstream", "run/fit_s0.spnr", "--image", "img.ppm", "--out-dir", "dec"],
    );
    let streamed = fs::read(tmp.path().join("str/stream_final.ppm")).unwrap();
    let decoded = fs::read(tmp.path().join("dec/decode_render.ppm")).unwrap();
    assert_eq!(streamed, decoded, "lossless stream must equal direct decode");

    let log = fs::read_to_string(tmp.path().join("str/stream_log.jsonl")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(summary["dropped"], 0);
    assert_eq!(summary["final_stage"], 3);
    // Stage renders 1..=3 all present under zero loss.
    for stage in 1..=3 {
        assert!(tmp.path().join(format!("str/stream_stage{stage}.ppm")).is_file());
    }
}

#[test]
fn truncated_stream_serves_only_the_first_stage() {
    let (tmp, _) = with_image();
    tiny_fit(tmp.path(), &[]);
    let out = ok(
        tmp.path(),
        &[
            "stream", "--bitstream", "run/fit_s0.spnr", "--truncate-after", "1",
            "--size", "16x16", "--out-dir", "str",
        ],
    );
    assert!(out.contains("decoded through stage 1"));
    assert!(tmp.path().join("str/stream_stage1.ppm").is_file());
    assert!(!tmp.path().join("str/stream_stage2.ppm").exists());
}

#[test]
fn report_tabulates_fit_and_attack_output() {
    let (tmp, _) = with_image();
    tiny_fit(tmp.path(), &["--seeds", "2"]);
    let out = ok(tmp.path(), &["report", "run/fit_summary.jsonl", "--out", "table.txt"]);
    assert!(out.contains("seed"));
    assert!(out.contains("psnr"));
    assert_eq!(out.lines().count(), 2 + 2, "header, rule, one row per seed");
    assert_eq!(fs::read_to_string(tmp.path().join("table.txt")).unwrap(), out);
}

#[test]
fn exit_codes_distinguish_usage_io_format_and_training_failures() {
    let (tmp, _) = with_image();
    // Unknown flag: clap usage error.
    assert_eq!(code(tmp.path(), &["fit", "--image", "img.ppm", "--bogus"]), 2);
    // Unreadable input: file I/O.
    assert_eq!(code(tmp.path(), &["fit", "--image", "absent.ppm", "--steps", "1"]), 5);
    // Truncated bitstream: format error.
    tiny_fit(tmp.path(), &[]);
    let whole = fs::read(tmp.path().join("run/fit_s0.spnr")).unwrap();
    fs::write(tmp.path().join("broken.spnr"), &whole[..40]).unwrap();
    assert_eq!(code(tmp.path(), &["decode", "--bitstream", "broken.spnr"]), 4);
    // Absurd learning rate: training diverges to non-finite loss.
    assert_eq!(
        code(
            tmp.path(),
            &[
                "fit", "--image", "img.ppm", "--method", "fourier", "--lr", "1e200",
                "--steps", "3", "--out-dir", "div",
            ],
        ),
        3
    );
    // Complete loss: nothing decodable arrives.
    assert_eq!(
        code(
            tmp.path(),
            &[
                "stream", "--bitstream", "run/fit_s0.spnr", "--loss-prob", "1",
                "--size", "16x16", "--out-dir", "lost",
            ],
        ),
        4
    );
}

#[test]
fn quantized_fit_records_the_smaller_payload() {
    let (tmp, _) = with_image();
    tiny_fit(tmp.path(), &["--quant", "u8", "--out-dir", "q8"]);
    // Flag order differs from tiny_fit's default dir; read both summaries.
    tiny_fit(tmp.path(), &[]);
    let read = |dir: &str| -> serde_json::Value {
        let text = fs::read_to_string(tmp.path().join(dir).join("fit_summary.jsonl")).unwrap();
        serde_json::from_str(text.lines().next().unwrap()).unwrap()
    };
    let (q8, f32) = (read("q8"), read("run"));
    let (b8, b32) = (
        q8["payload_bytes"].as_u64().unwrap(),
        f32["payload_bytes"].as_u64().unwrap(),
    );
    assert!(b8 * 3 < b32, "u8 payload {b8} should be ~4x smaller than f32 {b32}");
    assert!(
        q8["cf"].as_f64().unwrap() > f32["cf"].as_f64().unwrap(),
        "compression factor must improve with quantization"
    );
}
