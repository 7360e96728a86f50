use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use grushin_core::semigroup::apply_semigroup;
use grushin_core::{GridFunction, GridSpec, Profile, PropagatorKind};
use serde_json::Value;

const SMALL: [&str; 12] = [
    "--set",
    "grid.x_half_width=4",
    "--set",
    "grid.y_half_width=4",
    "--set",
    "grid.nx=33",
    "--set",
    "grid.ny=32",
    "--set",
    "time.dt=0.015625",
    "--set",
    "time.steps=16",
];

fn grushin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grushin")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_str()
        .unwrap()
        .to_owned()
}

fn run_in(dir: &Path, sub: &str, extra: &[&str]) -> (Output, Value) {
    let out = dir.to_str().unwrap();
    let mut args = vec![sub, "--out", out];
    args.extend_from_slice(extra);
    let o = grushin(&args);
    let text = fs::read_to_string(dir.join("summary.json")).unwrap_or_else(|_| {
        panic!("no summary: {}", String::from_utf8_lossy(&o.stderr));
    });
    (o, serde_json::from_str(&text).unwrap())
}

#[test]
fn exponents_reference_point() {
    let dir = tempfile::tempdir().unwrap();
    let (o, s) = run_in(dir.path(), "exponents", &["--config", &config("exponents.toml")]);
    assert!(o.status.success());
    assert_eq!(s["results"]["p1_star"].as_f64(), Some(2.5));
    assert_eq!(s["results"]["verdict"], "GlobalCaseI");
    assert_eq!(s["results"]["exact_arithmetic"], true);
    assert_eq!(s["config"]["params"]["p2"], "7/3");
    assert_eq!(s["passed"], true);
}

#[test]
fn gamma_zero_reports_infinite_markers() {
    let dir = tempfile::tempdir().unwrap();
    let (o, s) = run_in(dir.path(), "exponents", &["--set", "params.gamma=0"]);
    assert!(o.status.success());
    assert_eq!(s["results"]["inverse_gamma"], "+inf");
    assert_eq!(s["results"]["q_window"], Value::Null);
}

#[test]
fn kernel_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let (o, s) = run_in(dir.path(), "kernel-check", &["--config", &config("kernel_check.toml")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let n = s["results"]["normalization"].as_f64().unwrap();
    assert!((0.999..=1.001).contains(&n), "{n}");
}

#[test]
fn sourceless_solve_matches_semigroup() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL.to_vec();
    args.extend(["--set", "params.coeff1=0", "--set", "params.coeff2=0"]);
    let (o, s) = run_in(dir.path(), "solve", &args);
    assert!(o.status.success());
    assert_eq!(s["results"]["status"], "completed");
    let state = GridFunction::read_binary(fs::File::open(dir.path().join("final_state.bin")).unwrap()).unwrap();
    let grid = GridSpec::new(4.0, 4.0, 33, 32).unwrap();
    let u0 = Profile::Gaussian {
        amplitude: 0.1,
        center: [0.0, 0.0],
        widths: [1.0, 1.0],
    }
    .sample(grid)
    .unwrap();
    let free = apply_semigroup(&u0, 0.25, PropagatorKind::FiniteDifference).unwrap();
    assert!(free.sub(&state).unwrap().sup_norm() < 1e-10);
    let artifacts: Vec<&str> = s["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(artifacts, ["trace.csv", "final_state.bin", "final_state.csv", "summary.json"]);
}

#[test]
fn summaries_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let read = |sub: &str, extra: &[&str]| {
        let o = grushin(&[&[sub, "--out", dir.path().to_str().unwrap()], extra].concat());
        assert!(o.status.success());
        fs::read(dir.path().join("summary.json")).unwrap()
    };
    for (sub, extra) in [("picard", SMALL.as_slice()), ("kernel-check", &["--set", "kernel_check.nx=65"][..])] {
        assert_eq!(read(sub, extra), read(sub, extra), "{sub}");
    }
}

#[test]
fn invalid_config_yields_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["solve", "--out", out, "--set", "grid.nx=4"],
        vec!["solve", "--out", out, "--set", "params.p1=0.5"],
        vec!["solve", "--out", out, "--set", "unknown.key=1"],
        vec!["exponents", "--out", out, "--set", "params.p2=seven"],
        vec!["picard", "--out", out, "--config", "/no/such/file.toml"],
    ] {
        let o = grushin(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let record: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(record["error"]["kind"].is_string(), "{record}");
        assert!(record["error"]["message"].is_string());
    }
}

#[test]
fn failed_assertion_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let (o, s) = run_in(
        dir.path(),
        "exponents",
        &["--set", r#"assert=[{path="/results/p1_star", op="gt", value=3}]"#],
    );
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(s["passed"], false);
    assert_eq!(s["assertions"][0]["actual"].as_f64(), Some(2.5));
}

#[test]
fn absorbing_phase_scan_completes_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL.to_vec();
    args.extend([
        "--set",
        "params.coeff1=-1",
        "--set",
        "params.coeff2=-1",
        "--set",
        "phase_scan.p1={lo=2.0, hi=3.0, count=3}",
        "--set",
        "phase_scan.p2={lo=2.0, hi=3.0, count=2}",
    ]);
    let (o, s) = run_in(dir.path(), "phase-scan", &args);
    assert!(o.status.success());
    assert_eq!(s["results"]["counts"]["completed"], 6);
    assert!(s["results"]["cells"].as_array().unwrap().iter().all(|c| c["t_max_estimate"] == "+inf"));
    let plots: PathBuf = dir.path().join("plots");
    let o = grushin(&["export", dir.path().to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert!(o.status.success());
    let cells = fs::read_to_string(plots.join("cells.dat")).unwrap();
    let rows: Vec<&str> = cells.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(' ').count() == 3 && r.ends_with(" 0")));
    assert!(plots.join("overlay_p2_tilde.dat").is_file());
}

#[test]
fn export_of_missing_series_fails() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("trace.csv");
    let o = grushin(&["export", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let record: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(record["error"]["kind"], "missing_series");
}
