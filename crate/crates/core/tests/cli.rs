use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfl")).args(args).output().expect("bfl runs")
}

fn run(config: &str, out: &Path) -> Output {
    let cfg = configs().join(config);
    bfl(&["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()])
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let col = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn identities_pass() {
    let out = bfl(&["identities", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().all(|l| l.ends_with(" ok")), "{text}");
}

#[test]
fn helix_run_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("helix.toml", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("helix.json"));
    assert_eq!(report["schema"], "bfl-csv-v1");
    assert_eq!(report["config"]["nodes"], 64);
    assert!(report["summary"]["final_oracle_error"].as_f64().unwrap() <= 1e-6);
    let errors = csv_column(&dir.path().join("helix.csv"), "oracle_error");
    assert_eq!(errors.len(), 11);
    assert!(errors.iter().all(|e| *e <= 1e-6));
}

#[test]
fn csv_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run("bounds.toml", a.path());
    run("bounds.toml", b.path());
    let read = |d: &Path| std::fs::read(d.join("bounds.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert!(!read(a.path()).contains(&b'\r'));
}

#[test]
fn energy_column_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("energy.toml", dir.path()).status.code(), Some(0));
    let e = csv_column(&dir.path().join("energy.csv"), "energy");
    assert!(e.iter().all(|x| ((x - e[0]) / e[0]).abs() <= 1e-7));
}

#[test]
fn coupled_circle_keeps_unit_edges() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("coupled-circle.toml", dir.path()).status.code(), Some(0));
    let drift = csv_column(&dir.path().join("coupled-circle.csv"), "unit_drift");
    assert!(drift.iter().all(|d| *d <= 1e-8));
}

#[test]
fn divergence_writes_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("helix.toml"))
        .unwrap()
        .replace("\"rotation\"", "\"rk4\"")
        .replace("fixed:0.001", "fixed:0.01")
        .replace("oracle_tol = 1e-6", "");
    let cfg = dir.path().join("blowup.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = bfl(&["run", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report = json(&dir.path().join("helix.json"));
    assert_eq!(report["status"], "divergence");
    assert!(!csv_column(&dir.path().join("helix.csv"), "t").is_empty());
}

#[test]
fn usage_and_config_errors_exit_four() {
    let stab = configs().join("stability.toml");
    let stab = stab.to_str().unwrap();
    assert_eq!(bfl(&["stability", "-c", stab, "--eps", "0,1e-3"]).status.code(), Some(4));
    assert_eq!(bfl(&["stability", "-c", stab, "--eps", "1e-3"]).status.code(), Some(4));
    assert_eq!(bfl(&["run", "-c", "/nonexistent.toml"]).status.code(), Some(4));
    assert_eq!(bfl(&["converge"]).status.code(), Some(4));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "topology = \"periodic\"\nlength = 1\n").unwrap();
    assert_eq!(bfl(&["run", "-c", cfg.to_str().unwrap()]).status.code(), Some(4));
    let helix = configs().join("helix.toml");
    let out = bfl(&["converge", "-c", helix.to_str().unwrap(), "--levels", "2"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(bfl(&["--version"]).status.code(), Some(0));
}

#[test]
fn stability_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("stability.toml");
    let out = bfl(&[
        "stability",
        "-c",
        cfg.to_str().unwrap(),
        "--eps",
        "1e-2,1e-3,1e-4",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let ratios = csv_column(&dir.path().join("stability-stability.csv"), "ratio");
    assert_eq!(ratios.len(), 3);
    let report = json(&dir.path().join("stability-stability.json"));
    assert!(report["stability"]["spread"].as_f64().unwrap() < 0.2);
}

#[test]
fn thread_cap_does_not_change_results() {
    let cfg = configs().join("variable-speed.toml");
    let go = |threads: Option<&str>| {
        let dir = tempfile::tempdir().unwrap();
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_bfl"));
        cmd.args(["converge", "-c", cfg.to_str().unwrap(), "--levels", "3", "-o", dir.path().to_str().unwrap()]);
        if let Some(t) = threads {
            cmd.env("BFL_THREADS", t);
        }
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
        (
            std::fs::read(dir.path().join("variable-speed-converge-node.csv")).unwrap(),
            std::fs::read(dir.path().join("variable-speed-converge-mid.csv")).unwrap(),
        )
    };
    assert_eq!(go(Some("1")), go(None));
}
