//! End-to-end runs of the compiled binary against the bundled scenarios.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_quadgrad")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing artifact {name}: {e}"))
}

#[test]
fn fold_scenario_produces_fold_and_diagram() {
    let out = tempfile::tempdir().unwrap();
    let res = run(&[
        "--config",
        scenario("fig2-h-positive.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "branch",
    ]);
    assert!(
        res.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&res.stdout),
        String::from_utf8_lossy(&res.stderr)
    );
    let branch = read(out.path(), "branch.csv");
    let mut lines = branch.lines();
    assert_eq!(
        lines.next().unwrap(),
        "parameter_kind,parameter_value,arclength,sup_norm,max_u,min_u,probe_value,fold_flag,residual"
    );
    let fold_rows = branch
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(7) == Some("1"))
        .count();
    assert_eq!(fold_rows, 1, "expected exactly one fold annotation");
    let svg = read(out.path(), "branch.svg");
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
    let log = read(out.path(), "verify.log");
    assert!(log.contains("termination: norm-cap"), "log: {log}");
    assert!(log.contains("fold: parameter"));
    assert!(log.contains("reloaded"));
}

#[test]
fn no_fold_scenario_has_decreasing_lower_branch() {
    let out = tempfile::tempdir().unwrap();
    let res = run(&[
        "--config",
        scenario("fig1-h-negative.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "branch",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let branch = read(out.path(), "branch.csv");
    let rows: Vec<(f64, f64, &str)> = branch
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[6].parse().unwrap(), f[7])
        })
        .collect();
    assert!(rows.iter().all(|r| r.2 == "0"), "no fold flags expected");
    // probe value decreases as the parameter increases along the lower branch
    for w in rows.windows(2) {
        assert!(w[1].0 > w[0].0, "parameter must increase");
        assert!(w[1].1 < w[0].1 + 1e-12, "probe value must not increase");
    }
    let bounds = read(out.path(), "bounds.csv");
    assert!(bounds.starts_with("report,window_lo"));
    assert!(bounds.lines().any(|l| l.starts_with("lower,")));
    assert!(bounds.lines().any(|l| l.starts_with("upper,")));
}

#[test]
fn identical_runs_are_byte_identical() {
    let out1 = tempfile::tempdir().unwrap();
    let out2 = tempfile::tempdir().unwrap();
    for out in [&out1, &out2] {
        let res = run(&[
            "--config",
            scenario("fig1-h-negative.toml").to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "--seed",
            "42",
            "branch",
        ]);
        assert!(res.status.success());
    }
    for name in ["branch.csv", "solutions.csv", "bounds.csv", "branch.svg"] {
        assert_eq!(
            read(out1.path(), name),
            read(out2.path(), name),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn malformed_config_names_field_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let broken = std::fs::read_to_string(scenario("fig1-h-negative.toml"))
        .unwrap()
        .replace("mu1 = 1.0\n", "");
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, broken).unwrap();
    let res = run(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "branch",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("mu1"), "stderr should name the field: {err}");
}

#[test]
fn solve_and_eigen_subcommands() {
    let out = tempfile::tempdir().unwrap();
    let res = run(&[
        "--config",
        scenario("fig1-h-negative.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "solve",
    ]);
    assert!(res.status.success());
    assert!(read(out.path(), "solution.csv").starts_with("index,x,y,u"));

    let res = run(&[
        "--config",
        scenario("fig1-h-negative.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "eigen",
    ]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    let lambda1: f64 = stdout
        .split("lambda1 = ")
        .nth(1)
        .and_then(|s| s.split(',').next())
        .and_then(|s| s.trim().parse().ok())
        .expect("lambda1 in output");
    assert!((lambda1 - std::f64::consts::PI.powi(2)).abs() < 1e-2, "{lambda1}");
}

#[test]
fn verify_suite_and_oracle_compare() {
    let out = tempfile::tempdir().unwrap();
    let res = run(&["--out", out.path().to_str().unwrap(), "verify", "operators"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("suite=operators"));
    assert!(stdout.contains("pass=true"));

    let res = run(&[
        "--config",
        scenario("fig1-h-negative.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "oracle-compare",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    let gap: f64 = stdout
        .split("max nodal gap ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .expect("gap in output");
    assert!(gap < 1e-4, "cross-solver gap {gap}");
}

#[test]
fn homotopy_subcommand_folds_before_one() {
    let out = tempfile::tempdir().unwrap();
    let res = run(&[
        "--config",
        scenario("fig2-h-positive.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "homotopy-k",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let log = read(out.path(), "verify.log");
    assert!(log.contains("fold: k* = "), "log: {log}");
    let kmax: f64 = log
        .split("max accepted k: ")
        .nth(1)
        .and_then(|s| s.lines().next())
        .and_then(|s| s.trim().parse().ok())
        .expect("max k in log");
    assert!(kmax < 1.0, "k-branch accepted a point at k = {kmax}");
    let branch = read(out.path(), "branch.csv");
    assert!(branch.lines().nth(1).unwrap().starts_with("k,"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let res = run(&["verify", "nonsense"]);
    assert_eq!(res.status.code(), Some(2));
}
