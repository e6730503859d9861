//! End-to-end tests of the `tracemark` binary: exit codes, the data-owner
//! workflow, and reproducibility of command output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tracemark::manifest::{save_image, save_manifest};
use tracemark_core::harness::procedural_render;
use tracemark_core::{CaptionedPair, DatasetManifest, Seed};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tracemark"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// 40-pair corpus: five marker tokens in three captions each (frequency
/// 0.075), the rest filler.
fn write_small_corpus(dir: &Path) -> PathBuf {
    std::fs::create_dir_all(dir.join("images")).unwrap();
    let markers = ["angel", "church", "tavern", "bridge", "maria"];
    let mut manifest = DatasetManifest::new(dir.to_string_lossy(), Vec::new());
    for i in 0..40usize {
        let rel = format!("images/{i:02}.png");
        let img = procedural_render(Seed::new(7000 + i as u64), 32, 32);
        save_image(&img, &dir.join(&rel)).unwrap();
        let caption = if i < 15 {
            format!("{} painted scene number {i}", markers[i / 3])
        } else {
            format!("untitled composition number {i}")
        };
        manifest.push(CaptionedPair::new(rel, caption));
    }
    let path = dir.join("manifest.jsonl");
    save_manifest(&manifest, &path).unwrap();
    path
}

#[test]
fn frequencies_prints_marker_band() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_small_corpus(dir.path());
    let out = run(&[
        "frequencies",
        "--manifest",
        manifest.to_str().unwrap(),
        "--f-min",
        "0.05",
        "--f-max",
        "0.1",
        "--pool-size",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("angel"));
    assert!(text.contains("0.075"));
}

#[test]
fn frequencies_on_empty_manifest_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.jsonl");
    std::fs::write(&manifest, "").unwrap();
    let out = run(&["frequencies", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("manifest"));
}

#[test]
fn frequencies_with_empty_band_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_small_corpus(dir.path());
    let out = run(&[
        "frequencies",
        "--manifest",
        manifest.to_str().unwrap(),
        "--f-min",
        "0.4",
        "--f-max",
        "0.41",
        "--pool-size",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn missing_manifest_exits_2() {
    let out = run(&["frequencies", "--manifest", "/nonexistent/m.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn distribute_over_capacity_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_small_corpus(dir.path());
    let out = run(&[
        "distribute",
        "--manifest",
        manifest.to_str().unwrap(),
        "--ledger",
        dir.path().join("ledger.json").to_str().unwrap(),
        "--output",
        dir.path().join("releases").to_str().unwrap(),
        "--users",
        "11",
        "--min-tokens",
        "2",
        "--max-tokens",
        "2",
        "--f-min",
        "0.05",
        "--f-max",
        "0.1",
        "--pool-size",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

fn distribute_three_users(dir: &Path, manifest: &Path) -> Output {
    run(&[
        "--seed",
        "9",
        "distribute",
        "--manifest",
        manifest.to_str().unwrap(),
        "--ledger",
        dir.join("ledger.json").to_str().unwrap(),
        "--output",
        dir.join("releases").to_str().unwrap(),
        "--users",
        "3",
        "--min-tokens",
        "2",
        "--max-tokens",
        "2",
        "--f-min",
        "0.05",
        "--f-max",
        "0.1",
        "--pool-size",
        "5",
    ])
}

#[test]
fn workflow_distribute_trace_and_rerun_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_small_corpus(dir.path());

    let out = distribute_three_users(dir.path(), &manifest);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for user in 1..=3 {
        let release = dir.path().join(format!("releases/user_{user:03}"));
        assert!(release.join("manifest.jsonl").is_file());
        assert!(release.join("release.json").is_file());
    }
    let ledger_text = std::fs::read_to_string(dir.path().join("ledger.json")).unwrap();
    let ledger_json: serde_json::Value = serde_json::from_str(&ledger_text).unwrap();
    assert_eq!(ledger_json.as_array().unwrap().len(), 3);

    // Re-running without --force refuses to overwrite.
    let rerun = distribute_three_users(dir.path(), &manifest);
    assert_eq!(rerun.status.code(), Some(5), "{}", stderr(&rerun));

    // Train a small detector.
    let detector = dir.path().join("detector.json");
    let out = run(&[
        "--seed",
        "9",
        "train-detector",
        "--output",
        detector.to_str().unwrap(),
        "--substitute-models",
        "2",
        "--samples-per-model",
        "6",
        "--render-size",
        "48",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    // Trace a model fine-tuned on user 2's release.
    let ledger_path = dir.path().join("ledger.json");
    let trace = |extra: &[&str]| {
        let mut args: Vec<String> = [
            "--seed",
            "9",
            "trace",
            "--ledger",
            ledger_path.to_str().unwrap(),
            "--detector",
            detector.to_str().unwrap(),
            "--generations",
            "4",
            "--render-size",
            "48",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        args.extend(extra.iter().map(|s| s.to_string()));
        bin().args(&args).output().expect("binary runs")
    };

    let traced = trace(&["--oracle", "user", "--oracle-user", "2"]);
    assert_eq!(traced.status.code(), Some(0), "{}", stderr(&traced));
    let report: serde_json::Value = serde_json::from_str(&stdout(&traced)).unwrap();
    assert_eq!(report["outcome"]["outcome"], "traced");
    assert_eq!(report["outcome"]["user_id"], 2);

    // A clean model yields no watermark.
    let clean = trace(&["--oracle", "clean"]);
    assert_eq!(clean.status.code(), Some(0), "{}", stderr(&clean));
    let report: serde_json::Value = serde_json::from_str(&stdout(&clean)).unwrap();
    assert_eq!(report["outcome"]["outcome"], "no_watermark_found");

    // Dropping one trigger token forces a partial match.
    let ledger = tracemark::ledger_io::load_ledger(&ledger_path).unwrap();
    let first_token = ledger.get(2).unwrap().token_set.tokens()[0].clone();
    let partial = trace(&[
        "--oracle",
        "user",
        "--oracle-user",
        "2",
        "--drop-token",
        &first_token,
    ]);
    assert_eq!(partial.status.code(), Some(0), "{}", stderr(&partial));
    let report: serde_json::Value = serde_json::from_str(&stdout(&partial)).unwrap();
    assert_eq!(report["outcome"]["outcome"], "no_ledger_match");

    // Identical flags and seed reproduce identical bytes.
    let again = trace(&["--oracle", "user", "--oracle-user", "2"]);
    assert_eq!(stdout(&traced), stdout(&again));
}

#[test]
fn inject_twa_reports_ratio_and_auto_token() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_small_corpus(dir.path());
    let out = run(&[
        "--seed",
        "5",
        "inject-twa",
        "--manifest",
        manifest.to_str().unwrap(),
        "--output",
        dir.path().join("twa").to_str().unwrap(),
        "--token",
        "lgl",
        "-m",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("p = 0.100"));

    let auto = run(&[
        "--seed",
        "5",
        "inject-twa",
        "--manifest",
        manifest.to_str().unwrap(),
        "--output",
        dir.path().join("twa_auto").to_str().unwrap(),
        "--auto-token",
        "-m",
        "0",
    ]);
    assert_eq!(auto.status.code(), Some(0), "{}", stderr(&auto));
    let text = stdout(&auto);
    // The constructed token is echoed and absent from the tiny corpus
    // vocabulary by construction.
    assert!(text.contains("token \""));
    assert!(text.contains("0/40"));
}

#[test]
fn degrade_and_eval_run_on_a_release() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_small_corpus(dir.path());

    let degraded = run(&[
        "degrade",
        "--manifest",
        manifest.to_str().unwrap(),
        "--output",
        dir.path().join("blurred").to_str().unwrap(),
        "--method",
        "blur",
    ]);
    assert_eq!(degraded.status.code(), Some(0), "{}", stderr(&degraded));
    assert!(dir.path().join("blurred/manifest.jsonl").is_file());
    assert!(dir.path().join("blurred/release.json").is_file());

    let detector = dir.path().join("detector.json");
    let train = run(&[
        "train-detector",
        "--output",
        detector.to_str().unwrap(),
        "--substitute-models",
        "2",
        "--samples-per-model",
        "4",
        "--render-size",
        "32",
    ]);
    assert_eq!(train.status.code(), Some(0), "{}", stderr(&train));

    let eval = run(&[
        "eval",
        "--manifest",
        manifest.to_str().unwrap(),
        "--detector",
        detector.to_str().unwrap(),
        "--sample",
        "4",
    ]);
    assert_eq!(eval.status.code(), Some(0), "{}", stderr(&eval));
    let text = stdout(&eval);
    for kind in ["jpeg", "sharpen", "gaussian_noise", "gaussian_blur", "resize_roundtrip"] {
        assert!(text.contains(kind), "missing {kind} in table:\n{text}");
    }
}

#[test]
fn simulate_reports_tracked_users() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let out = run(&[
        "--seed",
        "3",
        "simulate",
        "--users",
        "4",
        "--min-tokens",
        "2",
        "--max-tokens",
        "3",
        "--q",
        "1.0",
        "--r",
        "0.0",
        "--generations",
        "4",
        "--render-size",
        "48",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("tracked 4/4 users"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["successes"], 4);
    assert_eq!(report["config"]["seed"], 3);
}

#[test]
fn probe_vote_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_small_corpus(dir.path());
    let out = distribute_three_users(dir.path(), &manifest);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let detector = dir.path().join("detector.json");
    let train = run(&[
        "train-detector",
        "--output",
        detector.to_str().unwrap(),
        "--substitute-models",
        "2",
        "--samples-per-model",
        "4",
        "--render-size",
        "48",
    ]);
    assert_eq!(train.status.code(), Some(0), "{}", stderr(&train));

    let ledger = tracemark::ledger_io::load_ledger(&dir.path().join("ledger.json")).unwrap();
    let token = ledger.get(1).unwrap().token_set.tokens()[0].clone();
    let out = run(&[
        "probe",
        "--ledger",
        dir.path().join("ledger.json").to_str().unwrap(),
        "--detector",
        detector.to_str().unwrap(),
        "--token",
        &token,
        "--oracle",
        "user",
        "--oracle-user",
        "1",
        "--generations",
        "4",
        "--render-size",
        "48",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("triggered = true"));
}
