//! End-to-end checks of the `nz-loops` binary against the shipped fixtures:
//! subcommand plumbing, JSON output determinism, and error surfacing.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nz-loops"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn invariants_output_is_deterministic() {
    let datum = fixture("fig8.json");
    let args = [
        "invariants",
        "--datum",
        datum.to_str().unwrap(),
        "--loops",
        "3",
    ];
    let first = run_ok(&args);
    let second = run_ok(&args);
    assert_eq!(first, second, "identical config must give identical bytes");
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    // S3 = -1/54 = -0.0185185...
    let s3 = v["sn"]["3"]["re"].as_str().unwrap();
    assert!(s3.starts_with("-1.85185185185185185"), "S3 = {s3}");
    assert_eq!(v["s0"]["standard_lift"], serde_json::Value::Bool(true));
    let tau_im = v["tau"]["value"]["im"].as_str().unwrap();
    assert!(tau_im.starts_with("8.6602540378443864"), "tau = {tau_im}");
}

#[test]
fn ingest_flatten_solve_chain() {
    let dir = std::env::temp_dir().join("nz_cli_chain_test");
    std::fs::create_dir_all(&dir).unwrap();
    let ingested = dir.join("ingested.json");
    run_ok(&[
        "ingest",
        "--datum",
        fixture("fig8.json").to_str().unwrap(),
        "--out",
        ingested.to_str().unwrap(),
    ]);
    let flattened = dir.join("flattened.json");
    run_ok(&[
        "flatten",
        "--longitude",
        "--datum",
        ingested.to_str().unwrap(),
        "--out",
        flattened.to_str().unwrap(),
    ]);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&flattened).unwrap()).unwrap();
    assert!(doc["nz"]["a"].is_array());
    assert!(doc["flattening"]["f"].is_array());

    let solved = run_ok(&["solve", "--datum", flattened.to_str().unwrap(), "--m", "1"]);
    let v: serde_json::Value = serde_json::from_str(&solved).unwrap();
    assert_eq!(v["standard_lift"], serde_json::Value::Bool(true));
    let ell_re = v["longitude_eigenvalue"]["re"].as_str().unwrap();
    assert!(ell_re.starts_with("-1"), "l = {ell_re}");
}

#[test]
fn move_emits_certificate() {
    let out = run_ok(&[
        "move",
        "--datum",
        fixture("fig8.json").to_str().unwrap(),
        "--kind",
        "meridian",
        "--row",
        "1",
        "--sign",
        "1",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    let cert = &doc["meta"]["certificate"];
    assert_eq!(cert["tau_sign_factor"], serde_json::json!(1));
    assert!(cert["input_datum"].is_string());
    assert_ne!(cert["input_datum"], cert["output_datum"]);
}

#[test]
fn check_runs_move_specs() {
    let dir = std::env::temp_dir().join("nz_cli_check_test");
    std::fs::create_dir_all(&dir).unwrap();
    let spec = dir.join("moves.json");
    std::fs::write(
        &spec,
        r#"[
            {"kind": "rotate", "tet": 1, "direction": "fwd"},
            {"kind": "edge", "row": 1},
            {"kind": "meridian", "row": 1, "sign": 1},
            {"kind": "flattening-swap"}
        ]"#,
    )
    .unwrap();
    let out = run_ok(&[
        "check",
        "--datum",
        fixture("fig8.json").to_str().unwrap(),
        "--moves",
        spec.to_str().unwrap(),
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["report"]["all_pass"], serde_json::Value::Bool(true));
    assert_eq!(v["report"]["checks"].as_array().unwrap().len(), 4);
}

#[test]
fn low_precision_is_refused() {
    let out = run(&[
        "invariants",
        "--datum",
        fixture("fig8.json").to_str().unwrap(),
        "--precision",
        "64",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("precision too low"), "stderr: {err}");
}

#[test]
fn continuation_tracks_m_path() {
    let out = run_ok(&[
        "continue",
        "--datum",
        fixture("fig8.json").to_str().unwrap(),
        "--m-path",
        "1.02,1.04,1.06,1.08,1.1",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["steps"].as_array().unwrap().len(), 5);
}
