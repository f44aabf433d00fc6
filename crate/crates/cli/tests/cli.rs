use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn crossing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossing"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SMALL: &str = r#"
regime = "weak"
d = 2
r = 1
betas = [0.05, 0.03]
replications = 200
epsilon = 1e-3
master_seed = 7

[covariance]
kind = "geometric"
q = 0.5
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn limits_prints_normalizing_constants() {
    let out = crossing(&["limits", "--beta", "0.01", "--r", "1", "--d", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("a(beta, r) = 1.7122528122"), "{text}");
    assert!(text.contains("1,229.627872,"), "{text}");
}

#[test]
fn limits_strong_and_fully_mixed() {
    let out = crossing(&["limits", "--beta", "0.002", "--d", "2", "--r", "1", "--regime", "strong", "--gamma", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("limit law = strong-mixture-r1"));
    let out = crossing(&["limits", "--beta", "0.002", "--regime", "fully-mixed"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("rho_beta = 0.4009"), "{}", stdout(&out));
}

#[test]
fn simulate_is_byte_identical_across_runs_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let first = crossing(&["simulate", "--config", &config, "--out", a.to_str().unwrap()]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = crossing(&["simulate", "--config", &config, "--workers", "1", "--out", b.to_str().unwrap()]);
    assert!(second.status.success());
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));

    let csv = fs::read_to_string(a.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "regime,d,r,gamma,beta,N,M,excluded,ks_upsilon,ks_tau,joint_distance,independence_gap,seconds"
    );
    assert_eq!(lines.count(), 2);
    let grid = fs::read_to_string(a.join("grid_00_beta_0.05.csv")).unwrap();
    assert_eq!(grid.lines().count(), 442);
    assert!(fs::read_to_string(a.join("summary.toml")).unwrap().contains("master_seed = 7"));
}

#[test]
fn seed_override_and_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(crossing(&["simulate", "--config", &config, "--out", a.to_str().unwrap(), "--format", "json-lines"]).status.success());
    assert!(crossing(&["simulate", "--config", &config, "--seed", "8", "--out", b.to_str().unwrap(), "--format", "json-lines"])
        .status
        .success());
    let rows = fs::read_to_string(a.join("results.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(rows.lines().next().unwrap()).unwrap();
    assert_eq!(first["regime"], "weak");
    assert_eq!(first["M"], 200);
    assert!(first["seconds"].is_null());
    assert_ne!(rows, fs::read_to_string(b.join("results.jsonl")).unwrap());
    assert_eq!(fs::read_to_string(a.join("grid_01_beta_0.03.jsonl")).unwrap().lines().count(), 441);
}

#[test]
fn timing_fills_seconds() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("t");
    assert!(crossing(&["simulate", "--config", &config, "--timing", "--out", out.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(!row.ends_with(','), "{row}");
}

#[test]
fn validation_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let strong = write_config(
        tmp.path(),
        "regime = \"strong\"\nd = 3\nr = 2\ngamma = 1.0\nbetas = [0.002]\nreplications = 100\n",
    );
    let out = crossing(&["simulate", "--config", &strong]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("only the cases r = 1 and r = d"));

    let empty = write_config(tmp.path(), "regime = \"weak\"\nd = 1\nr = 1\nbetas = []\nreplications = 100\n");
    assert_eq!(crossing(&["simulate", "--config", &empty]).status.code(), Some(2));
    assert_eq!(crossing(&["simulate"]).status.code(), Some(2));
    assert_eq!(crossing(&["simulate", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    // beta = 0.6 leaves a(β, r) without a real square root
    let out = crossing(&["limits", "--beta", "0.6"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_and_oracle_subcommands() {
    let out = crossing(&["verify", "--criterion", "6"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("PASS criterion 6"));
    let out = crossing(&["oracle"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("comparison bound example = 0.13901081076935259"));
}
