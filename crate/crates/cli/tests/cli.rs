use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn grassrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grassrisk"))
        .args(args)
        .env_remove("GRASSRISK_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn analyze_reports_mean_h_sq() {
    let out = grassrisk(&[
        "analyze",
        "--eigenvalues",
        "3,2,1,0.5,0.25",
        "--k",
        "2",
        "--delta",
        "0.05",
        "--no-timestamp",
    ]);
    let v = json(&out);
    let r = &v["result"];
    // Σ_{i>k, j≤k} λ_i λ_j / (λ_j − λ_i) for this spectrum.
    assert!((r["mean_h_sq"].as_f64().unwrap() - 5.3251).abs() < 1e-4);
    assert_eq!(v["command"], "analyze");
    assert_eq!(v["config"]["k"], 2);
    assert!(v.get("timestamp").is_none());
    assert!(r["levels"][0]["threshold"]["n_star"].as_u64().unwrap() > 0);
    let closed = &r["gaussian_closed_forms"];
    let ascent = &r["variance"]["v_big"]["value"];
    assert!((closed["v_big"].as_f64().unwrap() - ascent.as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn missing_gap_is_a_validation_error() {
    let out = grassrisk(&["analyze", "--eigenvalues", "2,2,1", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no eigengap"));
    assert!(out.stdout.is_empty());
}

#[test]
fn reports_are_reproducible() {
    let args = [
        "simulate",
        "--eigenvalues",
        "2,1",
        "--n",
        "200",
        "--trials",
        "150",
        "--seed",
        "17",
        "--no-timestamp",
    ];
    let a = grassrisk(&args);
    let b = grassrisk(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let mut two_jobs = args.to_vec();
    two_jobs.extend(["--jobs", "2"]);
    assert_eq!(grassrisk(&two_jobs).stdout, a.stdout);

    let timed = json(&grassrisk(&args[..args.len() - 1]));
    assert!(timed["wall_seconds"].as_f64().is_some());
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_grassrisk"));
        c.args([
            "simulate",
            "--eigenvalues",
            "2,1",
            "--n",
            "50",
            "--trials",
            "20",
        ])
        .args(["--format", "csv"])
        .args(extra)
        .env_remove("GRASSRISK_SEED");
        if let Some(s) = env {
            c.env("GRASSRISK_SEED", s);
        }
        c.output().unwrap().stdout
    };
    assert_eq!(run(Some("5"), &[]), run(None, &["--seed", "5"]));
    assert_ne!(run(Some("5"), &[]), run(None, &["--seed", "6"]));
}

#[test]
fn zero_trials_is_rejected() {
    let out = grassrisk(&[
        "simulate",
        "--eigenvalues",
        "2,1",
        "--n",
        "10",
        "--trials",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_has_one_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.csv");
    let out = grassrisk(&[
        "simulate",
        "--eigenvalues",
        "2,1",
        "--n",
        "100",
        "--trials",
        "37",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 38);
    assert!(text.starts_with("trial,dist,excess,max_angle,projector_p2_sq"));
}

#[test]
fn verify_passes_by_default() {
    let v = json(&grassrisk(&["verify", "--no-timestamp"]));
    let r = &v["result"];
    assert_eq!(r["passed"], true);
    assert_eq!(r["trials"], 1000);
    assert_eq!(r["suites"].as_array().unwrap().len(), 5);
    assert!(r["gated_failures"].as_array().unwrap().is_empty());
}

#[test]
fn verify_fails_under_a_tight_override() {
    let out = grassrisk(&[
        "verify",
        "--suite",
        "geometry",
        "--trials",
        "50",
        "--tolerance",
        "exp_log_roundtrip=0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["tolerance_overrides"]["exp_log_roundtrip"], 0.0);
    assert_eq!(
        v["result"]["gated_failures"][0],
        "geometry/exp_log_roundtrip"
    );
}

#[test]
fn unknown_tolerance_name_is_rejected() {
    let out = grassrisk(&["verify", "--trials", "5", "--tolerance", "nope=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_prints_usage() {
    let out = grassrisk(&["verify", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn spiked_simulation_tracks_exact_law() {
    let v = json(&grassrisk(&[
        "spiked",
        "--eta",
        "4,2",
        "--d",
        "6",
        "--n",
        "2000",
        "--trials",
        "400",
        "--seed",
        "4",
        "--no-timestamp",
    ]));
    let r = &v["result"];
    let law = r["analysis"]["mean_scaled_excess"].as_f64().unwrap();
    let sim = r["simulation"]["summary"]["mean_scaled_excess"]
        .as_f64()
        .unwrap();
    assert!((law - 5.5).abs() < 1e-9);
    assert!((sim - law).abs() < 0.1 * law, "{sim} vs {law}");
}

#[test]
fn graph_model_skips_vector_only_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    std::fs::write(&path, "0,2,1,0\n2,0,1,1\n1,1,0,3\n0,1,3,0\n").unwrap();
    let v = json(&grassrisk(&[
        "graph",
        "--weights",
        path.to_str().unwrap(),
        "--no-timestamp",
    ]));
    let a = &v["result"]["analysis"];
    assert_eq!(a["model_kind"], "edge_graph");
    assert!(a["levels"][0].get("threshold").is_none());
    assert!(a["threshold_note"].is_string());
    assert!(a["mean_h_sq"].as_f64().unwrap() > 0.0);
}

#[test]
fn model_config_and_spectral_model_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.json");
    std::fs::write(&cfg, r#"{"type": "gaussian", "eigenvalues": [3, 2, 1]}"#).unwrap();
    let sm = dir.path().join("spectral.json");
    std::fs::write(
        &sm,
        r#"{"eigenvalues": [3, 2, 1], "eigenvectors": [1,0,0, 0,1,0, 0,0,1], "k": 2}"#,
    )
    .unwrap();
    let from_cfg = json(&grassrisk(&[
        "analyze",
        "--model-config",
        cfg.to_str().unwrap(),
        "--k",
        "2",
        "--no-timestamp",
    ]));
    let from_sm = json(&grassrisk(&[
        "analyze",
        "--spectral-model",
        sm.to_str().unwrap(),
        "--no-timestamp",
    ]));
    assert_eq!(from_sm["config"]["k"], 2);
    assert_eq!(
        from_cfg["result"]["mean_h_sq"],
        from_sm["result"]["mean_h_sq"]
    );
}

#[test]
fn no_output_outside_the_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let status = Command::new(env!("CARGO_BIN_EXE_grassrisk"))
        .current_dir(dir.path())
        .args(["verify", "--trials", "5", "--out", "r.json"])
        .status()
        .unwrap();
    assert!(status.success());
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
    assert!(Path::new(&out).exists());
}
