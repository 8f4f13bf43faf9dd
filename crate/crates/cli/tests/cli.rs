use std::fs;
use std::process::{Command, Output};

fn gkdv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkdv")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const FLAT: &[&str] = &[
    "--set",
    "potential=constant",
    "--set",
    "n=1024",
    "--set",
    "length=120",
    "--set",
    "dt=0.01",
    "--set",
    "x0=-30",
    "--set",
    "window_start=0",
    "--set",
    "window_end=10",
    "--set",
    "sample_every=1",
];

#[test]
fn roots_prints_a_table() {
    let o = gkdv(&["roots", "--m", "3", "--lambdas", "0.1,0.9"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# m=3\nlambda,lambda_tilde,c_inf,kappa,branch\n"));
    // 0.1, lambda0 and 0.9
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(gkdv(&["roots", "--m", "5"]).status.code(), Some(2));
    assert_eq!(gkdv(&["roots", "--lambdas", "x"]).status.code(), Some(2));
    assert_eq!(gkdv(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = gkdv(&["simulate", "--lambda", "1.5", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = gkdv(&["simulate", "--set", "dt=abc", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));
}

#[test]
fn selftest_passes() {
    let o = gkdv(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn selftest_flags_a_wrong_constant() {
    let o = gkdv(&["selftest", "--xi-scale", "1.01"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    let failed: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].contains("f2_agreement"));
}

#[test]
fn simulate_then_track_and_defect() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = vec!["simulate", "--out", out.to_str().unwrap(), "--set", "snapshot_every=2"];
    args.extend_from_slice(FLAT);
    let o = gkdv(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("c_plus"));
    for f in [
        "manifest.toml",
        "series.csv",
        "track.csv",
        "summary.txt",
        "defect.csv",
        "snapshots/index.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }

    let manifest = out.join("manifest.toml");
    let snaps = out.join("snapshots");
    let track = dir.path().join("track.csv");
    let o = gkdv(&[
        "track",
        "--snapshots",
        snaps.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        track.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&track).unwrap();
    let last = text.lines().last().unwrap();
    let c: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((c - 1.0).abs() < 1e-6, "{last}");

    let o = gkdv(&[
        "defect",
        "--snapshots",
        snaps.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--window",
        "0:10",
        "--c-inf",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("# manifest="));
    assert!(text.contains("# summary,c_plus="));

    let o = gkdv(&[
        "defect",
        "--snapshots",
        snaps.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--window",
        "500:600",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn manifest_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let mut args = vec!["simulate", "--out", first.to_str().unwrap()];
    args.extend_from_slice(FLAT);
    assert!(gkdv(&args).status.success());
    let manifest = first.join("manifest.toml");
    let second = dir.path().join("b");
    let o = gkdv(&[
        "simulate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--set",
        "lambda=0.4",
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(second.join("manifest.toml")).unwrap();
    assert!(text.contains("lambda = 0.4"));
    assert!(text.contains("potential = \"constant\""));
}

#[test]
fn sweep_needs_a_wide_eps_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = gkdv(&[
        "sweep",
        "--eps-list",
        "0.2,0.1,0.08,0.07",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
