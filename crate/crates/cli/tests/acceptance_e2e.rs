//! End-to-end acceptance: drive the real binary through
//! init-toy -> extract -> tune -> eval --with-its and check every artifact.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn steerage(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steerage"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn criterion_10_end_to_end_toy_pipeline() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // single-threaded throughout: the generated config sets workers = 1
    let out = steerage(
        dir,
        &["init-toy", "--out-dir", "ws", "--source-layers", "6", "--target-layers", "4"],
    );
    assert_success(&out, "init-toy");
    let ws = dir.join("ws");
    for f in [
        "models/source.sfwt",
        "models/target.sfwt",
        "data/train.jsonl",
        "data/val.jsonl",
        "data/test.jsonl",
        "data/exemplars.jsonl",
        "prompts/system.txt",
        "toy-config.toml",
    ] {
        assert!(ws.join(f).exists(), "missing {f}");
    }

    let out = steerage(&ws, &["extract", "--config", "toy-config.toml"]);
    assert_success(&out, "extract");
    assert!(ws.join("out/toy.svec").exists());
    assert!(ws.join("out/toy.svec.meta.toml").exists());

    let out = steerage(&ws, &["tune", "--config", "toy-config.toml"]);
    assert_success(&out, "tune");
    let summary_text = std::fs::read_to_string(ws.join("out/sweep_summary.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&summary_text).unwrap();
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 19, "tune summary must list 19 lambda rows");
    let lambda_best = summary["lambda_best"].as_f64().unwrap();
    let baseline_accuracy = summary["baseline_accuracy"].as_f64().unwrap();
    let best_accuracy = rows
        .iter()
        .find(|r| r["lambda"].as_f64() == Some(lambda_best))
        .and_then(|r| r["accuracy"].as_f64())
        .unwrap();
    assert!(
        best_accuracy > baseline_accuracy,
        "steered accuracy at lambda_best ({best_accuracy}) must exceed baseline ({baseline_accuracy})"
    );
    // every per-lambda validation report was persisted
    for row in rows {
        let file = row["report_file"].as_str().unwrap();
        assert!(ws.join("out").join(file).exists(), "missing {file}");
    }

    let out = steerage(&ws, &["eval", "--config", "toy-config.toml", "--with-its"]);
    assert_success(&out, "eval --with-its");
    let its_text = std::fs::read_to_string(ws.join("out/its_summary.json")).unwrap();
    let its: serde_json::Value = serde_json::from_str(&its_text).unwrap();
    let its_rows = its["rows"].as_array().unwrap();
    assert_eq!(its_rows.len(), 19, "ITS must produce 19 per-lambda reports");
    for row in its_rows {
        let file = row["report_file"].as_str().unwrap();
        assert!(ws.join("out").join(file).exists(), "missing {file}");
    }
    let baseline_report = its["baseline_report_file"].as_str().unwrap();
    let aggregated_report = its["aggregated_report_file"].as_str().unwrap();
    let details = its["details_file"].as_str().unwrap();
    assert!(ws.join("out").join(baseline_report).exists());
    assert!(ws.join("out").join(aggregated_report).exists());
    assert!(ws.join("out").join(details).exists());
    let its_baseline = its["baseline_accuracy"].as_f64().unwrap();
    let its_aggregated = its["aggregated_accuracy"].as_f64().unwrap();
    assert!(
        its_aggregated > its_baseline,
        "aggregated accuracy {its_aggregated} must exceed baseline {its_baseline} on the planted task"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "pipeline took {elapsed:?}, budget is 5 minutes"
    );
    println!(
        "PASS criterion 10: init-toy -> extract -> tune -> eval --with-its in {elapsed:?} \
         (baseline {baseline_accuracy:.3}, lambda_best {lambda_best} at {best_accuracy:.3}, ITS {its_aggregated:.3})"
    );
}

#[test]
fn extract_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_success(&steerage(dir, &["init-toy", "--out-dir", "ws"]), "init-toy");
    let ws = dir.join("ws");

    assert_success(&steerage(&ws, &["extract", "--config", "toy-config.toml"]), "extract 1");
    let first = std::fs::read(ws.join("out/toy.svec")).unwrap();
    assert_success(&steerage(&ws, &["extract", "--config", "toy-config.toml"]), "extract 2");
    let second = std::fs::read(ws.join("out/toy.svec")).unwrap();
    assert_eq!(first, second, "extract must be deterministic end to end");
}

#[test]
fn missing_dataset_path_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_success(&steerage(dir, &["init-toy", "--out-dir", "ws"]), "init-toy");
    let ws = dir.join("ws");
    std::fs::remove_file(ws.join("data/train.jsonl")).unwrap();

    let out = steerage(&ws, &["extract", "--config", "toy-config.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("train.jsonl"), "stderr must name the path: {stderr}");
    assert!(stderr.starts_with("error:"), "machine-parsable error line: {stderr}");
}

#[test]
fn eval_mode_flags_are_exclusive_and_required() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_success(&steerage(dir, &["init-toy", "--out-dir", "ws"]), "init-toy");
    let ws = dir.join("ws");

    let both = steerage(
        &ws,
        &["eval", "--config", "toy-config.toml", "--with-its", "--lambda", "0.5"],
    );
    assert_eq!(both.status.code(), Some(2), "conflicting flags must be a usage error");

    let neither = steerage(&ws, &["eval", "--config", "toy-config.toml"]);
    assert_eq!(neither.status.code(), Some(2), "one mode flag is required");
}

#[test]
fn eval_at_lambda_zero_equals_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_success(&steerage(dir, &["init-toy", "--out-dir", "ws"]), "init-toy");
    let ws = dir.join("ws");
    assert_success(&steerage(&ws, &["extract", "--config", "toy-config.toml"]), "extract");
    assert_success(
        &steerage(&ws, &["eval", "--config", "toy-config.toml", "--lambda", "0.0"]),
        "eval --lambda 0.0",
    );

    let baseline =
        std::fs::read_to_string(ws.join("out/toy-source__toy-target__toy__baseline.report.jsonl"))
            .unwrap();
    let steered =
        std::fs::read_to_string(ws.join("out/toy-source__toy-target__toy__lambda-0.report.jsonl"))
            .unwrap();
    // skip each file's header (metadata differs); the record lines must match
    let records = |text: &str| -> Vec<String> { text.lines().skip(1).map(String::from).collect() };
    assert_eq!(records(&baseline), records(&steered));
}

#[test]
fn singleton_grid_reports_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_success(&steerage(dir, &["init-toy", "--out-dir", "ws"]), "init-toy");
    let ws = dir.join("ws");
    assert_success(&steerage(&ws, &["extract", "--config", "toy-config.toml"]), "extract");
    assert_success(
        &steerage(&ws, &["tune", "--config", "toy-config.toml", "--grid", "0.05"]),
        "tune --grid 0.05",
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.join("out/sweep_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 1);
    assert_eq!(summary["lambda_best"].as_f64(), Some(0.05));

    // greedy decoding: a rerun reproduces the summary byte for byte
    let first = std::fs::read(ws.join("out/sweep_summary.json")).unwrap();
    assert_success(
        &steerage(&ws, &["tune", "--config", "toy-config.toml", "--grid", "0.05"]),
        "tune rerun",
    );
    let second = std::fs::read(ws.join("out/sweep_summary.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn analyze_self_is_identity_diagonal_and_plots_render() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_success(&steerage(dir, &["init-toy", "--out-dir", "ws"]), "init-toy");
    let ws = dir.join("ws");
    assert_success(&steerage(&ws, &["extract", "--config", "toy-config.toml"]), "extract");
    assert_success(
        &steerage(
            &ws,
            &["analyze", "--set-a", "out/toy.svec", "--set-b", "out/toy.svec", "--output", "out/self.csv"],
        ),
        "analyze",
    );
    let csv = std::fs::read_to_string(ws.join("out/self.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7); // header + 6 layers
    for (i, line) in lines.iter().skip(1).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let diag: f64 = fields[i + 1].parse().unwrap();
        assert!((diag - 1.0).abs() < 1e-9);
    }

    assert_success(
        &steerage(
            &ws,
            &["plot", "--kind", "heatmap", "--input", "out/self.csv", "--output", "out/self.svg"],
        ),
        "plot heatmap",
    );
    assert!(ws.join("out/self.svg").exists());
}

#[test]
fn plot_rejects_malformed_matrix_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.csv"), "not,a\nheatmap").unwrap();
    let out = steerage(
        dir,
        &["plot", "--kind", "heatmap", "--input", "bad.csv", "--output", "out.svg"],
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("parse error"), "stderr: {stderr}");
    assert!(stderr.contains("bad.csv"), "stderr must name the file: {stderr}");
}

#[test]
fn plot_sweep_summary_renders_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_success(&steerage(dir, &["init-toy", "--out-dir", "ws"]), "init-toy");
    let ws = dir.join("ws");
    assert_success(&steerage(&ws, &["extract", "--config", "toy-config.toml"]), "extract");
    assert_success(&steerage(&ws, &["tune", "--config", "toy-config.toml"]), "tune");
    assert_success(
        &steerage(
            &ws,
            &["plot", "--kind", "sweep", "--input", "out/sweep_summary.json", "--output", "out/sweep.svg"],
        ),
        "plot sweep",
    );
    let svg = std::fs::read_to_string(ws.join("out/sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
}
