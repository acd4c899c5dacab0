//! End-to-end checks of the command-line surface: exit codes, error code
//! prefixes, and output schemas.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lowdim")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lowdim_cli_{name}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validate_builtin_ok() {
    let out = run(&["validate", "--structure", "cross_segments"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "OK");
}

#[test]
fn validate_rejects_violating_config() {
    let dir = tmp_dir("badcfg");
    let cfg = dir.join("bad.json");
    // Two coplanar overlapping discs.
    std::fs::write(
        &cfg,
        r#"{
            "name": "coplanar",
            "components": [
                {"id": 1, "dim": 2, "origin": [0,0,0], "tangents": [[1,0,0],[0,1,0]],
                 "shape": {"kind": "disc", "center": [0,0], "radius": 1.0}},
                {"id": 2, "dim": 2, "origin": [0.5,0,0], "tangents": [[1,0,0],[0,1,0]],
                 "shape": {"kind": "disc", "center": [0,0], "radius": 1.0}}
            ]
        }"#,
    )
    .unwrap();
    let out = run(&["validate", "--structure", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_VALID"));
}

#[test]
fn incompatible_rhs_exits_with_compat_code() {
    let dir = tmp_dir("compat");
    let out = run(&[
        "solve-elliptic",
        "--structure",
        "disc_plus_segment",
        "--rhs",
        "1",
        "--h",
        "0.25",
        "--out",
        dir.join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_COMPAT"));
}

#[test]
fn runtime_evaluation_error_is_reported() {
    let dir = tmp_dir("eval");
    let out = run(&[
        "solve-elliptic",
        "--structure",
        "cross_segments",
        "--rhs",
        "1/0",
        "--h",
        "0.25",
        "--out",
        dir.join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("E_EVAL"), "{err}");
}

#[test]
fn expression_syntax_error_has_position() {
    let dir = tmp_dir("syntax");
    let out = run(&[
        "solve-elliptic",
        "--structure",
        "cross_segments",
        "--rhs",
        "s + * 1",
        "--h",
        "0.25",
        "--out",
        dir.join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("E_EXPR") && err.contains("position"), "{err}");
}

#[test]
fn poincare_reports_the_segment_constant() {
    let dir = tmp_dir("poincare");
    let cfg = dir.join("segment.json");
    std::fs::write(
        &cfg,
        r#"{
            "name": "segment",
            "components": [
                {"id": 1, "dim": 1, "origin": [0,0,0], "tangents": [[0,1,0]],
                 "shape": {"kind": "interval", "a": -1, "b": 1}}
            ]
        }"#,
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "poincare",
        "--structure",
        cfg.to_str().unwrap(),
        "--h",
        "0.02",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    let c = summary["constants"][0].as_f64().unwrap();
    assert!((c - 0.4053).abs() < 0.01, "constant {c}");
}

#[test]
fn solution_csv_schema_and_diagnose_roundtrip() {
    let dir = tmp_dir("roundtrip");
    let sol_dir = dir.join("sol");
    let out = run(&[
        "solve-elliptic",
        "--structure",
        "cross_segments",
        "--rhs",
        "1:s",
        "--h",
        "0.1",
        "--out",
        sol_dir.to_str().unwrap(),
        "--dump-matrices",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(sol_dir.join("solution.csv")).unwrap();
    assert!(csv.starts_with("component_id,local_vertex,x,y,z,value\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sol_dir.join("summary.json")).unwrap())
            .unwrap();
    for key in ["dofs", "groups", "residual", "group_means", "energy"] {
        assert!(summary.get(key).is_some(), "missing key {key}");
    }
    // Matrix dumps: `row col value` triples.
    let koo = std::fs::read_to_string(sol_dir.join("K.coo")).unwrap();
    assert!(koo.lines().all(|l| l.split_whitespace().count() == 3));

    let diag_dir = dir.join("diag");
    let out = run(&[
        "diagnose",
        "--structure",
        "cross_segments",
        "--solution",
        sol_dir.join("solution.csv").to_str().unwrap(),
        "--h",
        "0.1",
        "--checks",
        "traces,cosserat,h2,continuity",
        "--out",
        diag_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(diag_dir.join("diagnostics.json")).unwrap())
            .unwrap();
    for key in ["trace_mismatch", "h2_seminorms", "continuity_jumps", "cosserat_pass"] {
        assert!(diag.get(key).is_some(), "missing key {key}");
    }
    assert_eq!(diag["cosserat_pass"], serde_json::Value::Bool(true));
    assert_eq!(diag["trace_mismatch"][0]["max"], 0.0);

    // Wrong --h is detected via vertex coordinates.
    let out = run(&[
        "diagnose",
        "--structure",
        "cross_segments",
        "--solution",
        sol_dir.join("solution.csv").to_str().unwrap(),
        "--h",
        "0.2",
        "--out",
        diag_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mesh_export_blocks() {
    let dir = tmp_dir("mesh");
    let out = run(&[
        "validate",
        "--structure",
        "disc_plus_segment",
        "--h",
        "0.4",
        "--out",
        dir.to_str().unwrap(),
        "--export-mesh",
    ]);
    assert!(out.status.success());
    for id in [1, 2] {
        let text = std::fs::read_to_string(dir.join(format!("component_{id}.mesh"))).unwrap();
        assert!(text.starts_with("vertices "));
        assert!(text.contains("\ncells "));
        assert!(text.contains("\njunction_nodes "));
    }
}

#[test]
fn taylor_divergence_guard_maps_to_exit_2() {
    let dir = tmp_dir("guard");
    let out = run(&[
        "semigroup",
        "--structure",
        "cross_segments",
        "--g",
        "s",
        "--t",
        "10",
        "--taylor",
        "--tol",
        "0.00000001",
        "--h",
        "0.05",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E_DIVERGE"));
}

/// Byte-identical outputs across repeated runs of every command.
#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tmp_dir("determinism");
    let cases: Vec<(Vec<String>, Vec<&str>)> = vec![
        (
            vec![
                "solve-elliptic".into(),
                "--structure".into(),
                "cross_segments".into(),
                "--rhs".into(),
                "1:s".into(),
                "--h".into(),
                "0.05".into(),
            ],
            vec!["solution.csv", "summary.json"],
        ),
        (
            vec![
                "solve-parabolic".into(),
                "--structure".into(),
                "cross_segments".into(),
                "--u0".into(),
                "0".into(),
                "--rhs".into(),
                "1:s".into(),
                "--T".into(),
                "1".into(),
                "--dt".into(),
                "0.1".into(),
                "--h".into(),
                "0.1".into(),
                "--stationary".into(),
            ],
            vec!["trajectory.csv", "solution.csv"],
        ),
        (
            vec![
                "semigroup".into(),
                "--structure".into(),
                "cross_segments".into(),
                "--g".into(),
                "s".into(),
                "--t".into(),
                "0.1,0.5".into(),
                "--h".into(),
                "0.1".into(),
            ],
            vec!["modes.csv", "evolution.csv"],
        ),
    ];
    for (i, (args, files)) in cases.iter().enumerate() {
        let out_a = dir.join(format!("a{i}"));
        let out_b = dir.join(format!("b{i}"));
        for out in [&out_a, &out_b] {
            let mut full: Vec<String> = args.clone();
            full.push("--out".into());
            full.push(out.to_str().unwrap().into());
            full.push("--quiet".into());
            let res = Command::new(bin()).args(&full).output().unwrap();
            assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        }
        for f in files {
            let a = std::fs::read(out_a.join(f)).unwrap();
            let b = std::fs::read(out_b.join(f)).unwrap();
            assert_eq!(a, b, "case {i}: {f} differs between runs");
        }
    }
    cleanup(&dir);
}

fn cleanup(dir: &Path) {
    let _ = std::fs::remove_dir_all(dir);
}
