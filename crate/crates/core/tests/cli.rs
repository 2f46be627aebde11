use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hsf_core::report::read_bundle;

fn hsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsf"))
        .args(args)
        .output()
        .unwrap()
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/scale_suite.json")
}

fn write_plan(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("plan.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn fixture_passes_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = hsf(&[
        "run",
        fixture().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let bundle = read_bundle(&out).unwrap();
    assert!(bundle.all_passed());
    assert_eq!(bundle.summary.studies, bundle.plan.studies.len());
    assert_eq!(
        bundle.summary.checks,
        bundle.studies.iter().map(|s| s.checks.len()).sum::<usize>()
    );
}

#[test]
fn failing_check_gives_exit_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(
        dir.path(),
        r#"{"schema": 1, "scale": {"formula": "linear", "n": 8},
            "sequences": {"e": {"generator": {"kind": "canonical_basis"}, "m": 0}},
            "studies": [{"kind": "classify", "sequence": "e", "p": 1, "truncations": [8, 16, 32], "expect": "frame"}]}"#,
    );
    let o = hsf(&["run", plan.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("study,claim,p,r,m,N,value,threshold,pass\n"));
    assert!(csv.trim_end().ends_with(",false"), "{csv}");
}

#[test]
fn invalid_plan_reports_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(
        dir.path(),
        r#"{"schema": 1, "scale": {"formula": "explicit", "weights": [1.0, 0.5]}}"#,
    );
    let o = hsf(&["run", plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("/scale") && err.contains("a_j >= 1"), "{err}");
}

#[test]
fn seed_override_replaces_embedded_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(
        dir.path(),
        r#"{"schema": 1, "scale": {"formula": "linear", "n": 8},
            "sequences": {"psi": {"generator": {"kind": "random_bessel", "count": 12, "seed": 1}, "m": 0}},
            "studies": [{"kind": "frame_bounds", "sequence": "psi", "p": [0]}]}"#,
    );
    let run = |extra: &[&str]| {
        let mut args = vec!["run", plan.to_str().unwrap(), "--format", "csv"];
        args.extend_from_slice(extra);
        let o = hsf(&args);
        assert_eq!(o.status.code(), Some(0));
        o.stdout
    };
    let json = |extra: &[&str]| {
        let out = dir.path().join("r.json");
        let mut args = vec![
            "run",
            plan.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert_eq!(hsf(&args).status.code(), Some(0));
        read_bundle(&out).unwrap()
    };
    assert_eq!(run(&[]), run(&[]));
    let a = json(&[]);
    let b = json(&["--seed-override", "77"]);
    assert_ne!(a.plan, b.plan);
    assert_ne!(a.studies, b.studies);
}

#[test]
fn list_studies_and_help() {
    let o = hsf(&["--list-studies"]);
    assert!(o.status.success());
    let listing = String::from_utf8(o.stdout).unwrap();
    for kind in [
        "frame_bounds",
        "unitarity",
        "pivot_adjoint",
        "transfer",
        "propagation",
        "duality",
        "collapse",
        "classify",
    ] {
        assert!(listing.contains(kind), "{kind}");
    }
    let help = String::from_utf8(hsf(&["--help"]).stdout).unwrap();
    assert!(help.contains("collapse") && help.contains("HSF_NUM_THREADS"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("r{threads}.csv"));
        let o = Command::new(env!("CARGO_BIN_EXE_hsf"))
            .env("HSF_NUM_THREADS", threads)
            .args([
                "run",
                fixture().to_str().unwrap(),
                "--format",
                "csv",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        outputs.push(fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
