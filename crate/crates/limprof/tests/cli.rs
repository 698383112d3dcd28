//! End-to-end checks of the installed binary: real process, real argv, real
//! files, asserting the documented exit-code contract (0 success, 2 config,
//! 3 runtime) and the shape of everything written to disk.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn limprof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limprof"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// A small, fast profiling setup against a noiseless synthetic job.
fn synthetic_config() -> &'static str {
    r#"{
        "session": {
            "l_min": 0.1, "l_max": 4.0, "delta": 0.1,
            "anchor_fraction": 0.05, "n_initial": 3, "max_steps": 5,
            "strategy": "nms", "seed": 9,
            "stopping": {
                "confidence_level": 0.95, "lambda": 0.10,
                "min_samples": 4, "max_samples": 4
            }
        },
        "oracle": {
            "type": "synthetic",
            "model": { "tier": 4, "a": 2.0, "b": 0.8, "c": 0.3, "d": 1.0 },
            "sigma": 0.0
        }
    }"#
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

// ─── Global flags ───

#[test]
fn help_and_version_exit_zero_and_name_the_subcommands() {
    let help = limprof(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = stdout_of(&help);
    for subcommand in ["profile", "fit", "bench", "simulate"] {
        assert!(text.contains(subcommand), "--help does not mention {subcommand}");
    }

    let version = limprof(&["--version"]);
    assert_eq!(version.status.code(), Some(0));
    assert!(stdout_of(&version).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn missing_subcommand_and_unknown_flags_are_usage_errors() {
    assert_eq!(limprof(&[]).status.code(), Some(2));

    let unknown = limprof(&["profile", "--warp-factor", "9"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr_of(&unknown).contains("--warp-factor"));

    let bad_strategy = limprof(&["profile", "--strategy", "clairvoyant"]);
    assert_eq!(bad_strategy.status.code(), Some(2));
    assert!(stderr_of(&bad_strategy).contains("clairvoyant"));
}

#[test]
fn missing_config_file_exits_2_and_names_the_path() {
    let gone = limprof(&["profile", "--config", "/no/such/limprof.json"]);
    assert_eq!(gone.status.code(), Some(2));
    assert!(stderr_of(&gone).contains("/no/such/limprof.json"));
}

// ─── profile ───

#[test]
fn profile_writes_versioned_reports_and_a_sane_recommendation() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), synthetic_config());
    let out_dir = dir.path().join("out");

    let run = limprof(&[
        "profile",
        "--config",
        &config,
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0), "stderr: {}", stderr_of(&run));

    let session: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("session.json")).unwrap()).unwrap();
    assert_eq!(session["schema_version"], 1);
    assert_eq!(session["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(session["config"]["session"]["strategy"], "nms");
    assert_eq!(session["session"]["probes"].as_array().unwrap().len(), 5);
    // Noiseless power-law data: the target is the anchor's own runtime, so
    // the recommendation is the anchor limit itself.
    let recommended = session["session"]["recommended_limit"].as_f64().unwrap();
    assert!((recommended - 0.2).abs() < 1e-9, "recommended {recommended}");

    let model: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["schema_version"], 1);
    assert_eq!(model["model"]["tier"], 5);
    assert_eq!(model["points_used"], 5);
    // σ = 0 and an in-family curve: the fit recovers it almost exactly.
    let a = model["model"]["a"].as_f64().unwrap();
    let d = model["model"]["d"].as_f64().unwrap();
    let b = model["model"]["b"].as_f64().unwrap();
    let effective_a = a * d.powf(-b);
    assert!((effective_a - 2.0).abs() < 1e-3, "effective scale {effective_a}");
    assert!((b - 0.8).abs() < 1e-3, "exponent {b}");
}

#[test]
fn profile_rejects_a_nonpositive_target_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), synthetic_config());
    let run = limprof(&["profile", "--config", &config, "--target-runtime", "-1.0"]);
    assert_eq!(run.status.code(), Some(2));
}

// ─── simulate → profile round trip ───

#[test]
fn simulate_then_replay_the_trace_through_profile() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), synthetic_config());
    let trace = dir.path().join("trace.csv");

    let sim = limprof(&[
        "simulate",
        "--config",
        &config,
        "--output",
        trace.to_str().unwrap(),
        "--samples-per-limit",
        "6",
    ]);
    assert_eq!(sim.status.code(), Some(0), "stderr: {}", stderr_of(&sim));

    let body = fs::read_to_string(&trace).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("cpu_limit,sample_index,runtime_seconds"));
    assert_eq!(lines.count(), 40 * 6, "40 grid limits × 6 samples");

    // Replay: same session config, oracle swapped to the written trace.
    let mut replay_config: Value = serde_json::from_str(synthetic_config()).unwrap();
    replay_config["oracle"] =
        serde_json::json!({ "type": "trace", "path": trace.to_str().unwrap() });
    replay_config["session"]["stopping"]["min_samples"] = 6.into();
    replay_config["session"]["stopping"]["max_samples"] = 6.into();
    let replay_path = dir.path().join("replay.json");
    fs::write(&replay_path, replay_config.to_string()).unwrap();

    let out_dir = dir.path().join("replayed");
    let run = limprof(&[
        "profile",
        "--config",
        replay_path.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0), "stderr: {}", stderr_of(&run));
    let session: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("session.json")).unwrap()).unwrap();
    let recommended = session["session"]["recommended_limit"].as_f64().unwrap();
    assert!((recommended - 0.2).abs() < 1e-9, "recommended {recommended}");
}

#[test]
fn simulate_without_a_synthetic_oracle_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut config: Value = serde_json::from_str(synthetic_config()).unwrap();
    config["oracle"] = serde_json::json!({ "type": "trace", "path": "whatever.csv" });
    let path = write_config(dir.path(), &config.to_string());

    let run = limprof(&["simulate", "--config", &path]);
    assert_eq!(run.status.code(), Some(2));
}

// ─── fit ───

#[test]
fn fit_reads_a_points_csv_and_writes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("points.csv");
    // Exact tier-2 data: runtime = 3 / limit.
    fs::write(&csv, "cpu_limit,mean_runtime\n0.5,6.0\n1.0,3.0\n").unwrap();

    let run = limprof(&[
        "fit",
        "--input",
        csv.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0), "stderr: {}", stderr_of(&run));

    let model: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model["model"]["tier"], 2);
    assert!((model["model"]["a"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(model["points_used"], 2);
}

#[test]
fn fit_rejects_malformed_rows_with_their_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("points.csv");
    fs::write(&csv, "cpu_limit,mean_runtime\n0.5,6.0\n1.0,not-a-number\n").unwrap();

    let run = limprof(&["fit", "--input", csv.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr_of(&run).contains('3'), "stderr lacks the offending line: {}", stderr_of(&run));
}

// ─── bench ───

#[test]
fn bench_writes_the_report_and_the_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut config: Value = serde_json::from_str(synthetic_config()).unwrap();
    config["bench"] = serde_json::json!({
        "strategies": ["nms", "random"],
        "repetitions": 2
    });
    let path = write_config(dir.path(), &config.to_string());
    let out_dir = dir.path().join("bench-out");

    let run = limprof(&[
        "bench",
        "--config",
        &path,
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0), "stderr: {}", stderr_of(&run));

    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("bench.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    // 2 strategies × 2 repetitions × steps 4..=5.
    assert_eq!(report["benchmark"]["rows"].as_array().unwrap().len(), 8);

    let smape_table = fs::read_to_string(out_dir.join("smape_by_step.csv")).unwrap();
    assert_eq!(smape_table.lines().count(), 1 + 8);
    assert!(smape_table.starts_with("config_index,strategy,repetition,step,smape"));

    let time_table = fs::read_to_string(out_dir.join("time_by_step.csv")).unwrap();
    assert_eq!(time_table.lines().count(), 1 + 8);

    let wins = fs::read_to_string(out_dir.join("wins.csv")).unwrap();
    assert_eq!(wins.lines().count(), 1 + 2, "one row per strategy");
    assert!(wins.starts_with("strategy,wins_0,wins_10"));
}
