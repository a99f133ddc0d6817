// SPDX-License-Identifier: Apache-2.0
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn rigidnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigidnet")).args(args).output().unwrap()
}

fn rigidnet_threads(threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigidnet")).env("RIGIDNET_THREADS", threads).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `(theta, sector, statistic) -> value` from a CSV output.
fn rows(path: &Path) -> Vec<(f64, usize, String, f64)> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].to_string(), r[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn validate_prints_a_fixed_point() {
    let dir = TempDir::new().unwrap();
    let first = rigidnet(&["validate", data("line4.json").to_str().unwrap()]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let canonical = dir.path().join("canonical.json");
    fs::write(&canonical, &first.stdout).unwrap();
    let second = rigidnet(&["validate", canonical.to_str().unwrap()]);
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn equilibrium_writes_line_quantities() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("eq");
    let o = rigidnet(&["equilibrium", data("line4.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = rows(&out.join("equilibrium.csv"));
    let golden = [
        ("y", [0.54, 0.36, 0.34, 0.24]),
        ("l", [0.54, 0.14, 0.19, 0.12]),
        ("c", [0.33, 0.19, 0.22, 0.24]),
    ];
    for (stat, values) in golden {
        for (k, g) in values.iter().enumerate() {
            let (_, _, _, v) = table.iter().find(|r| r.1 == k + 1 && r.2 == stat).unwrap();
            assert!((v - g).abs() <= 0.01, "{stat} sector {}: {v} vs {g}", k + 1);
        }
    }
    assert!(table.iter().all(|r| r.0 == 0.5));
    let header = fs::read_to_string(out.join("equilibrium.csv")).unwrap();
    assert!(header.starts_with("# rigidnet "));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report.get("config").is_some() && report.get("report").is_some());
}

#[test]
fn simulation_is_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("sim{threads}"));
        let o = rigidnet_threads(
            threads,
            &["simulate", data("cycle4.json").to_str().unwrap(), "--draws", "60000", "--seed", "5", "--out", out.to_str().unwrap()],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(out.join("simulation.csv")).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    let hist = dir.path().join("sim1").join("hist_tau_sector2.txt");
    assert!(fs::read_to_string(hist).unwrap().lines().any(|l| !l.starts_with('#')));
}

#[test]
fn defaults_classifies_the_line() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d");
    let o = rigidnet(&["defaults", data("line4.json").to_str().unwrap(), "--eta-o", "-2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("defaults.csv")).unwrap();
    let verdicts: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(verdicts[0], "NEVER");
    assert_eq!(verdicts[1], "DEFAULT");
    assert!(out.join("thresholds.json").exists());
}

#[test]
fn sweep_passes_on_the_line() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = rigidnet(&[
        "sweep", data("line4.json").to_str().unwrap(), "--sector", "2", "--theta-grid", "0:1:0.25", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("sweep.csv").exists());
}

#[test]
fn table_two_reproduces() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t");
    let o = rigidnet(&["reproduce", "--table", "2", "--draws", "10000", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["table_2.csv", "table_2_diff.txt", "table_2.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!fs::read_to_string(out.join("table_2_diff.txt")).unwrap().contains("FAIL"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&rigidnet(&["reproduce", "--table", "9", "--out", out])), 2);
    assert_eq!(code(&rigidnet(&["frobnicate"])), 2);
    let line = data("line4.json");
    assert_eq!(code(&rigidnet(&["sweep", line.to_str().unwrap(), "--sector", "2", "--theta-grid", "1:0", "--out", out])), 2);
    assert_eq!(code(&rigidnet_threads("zero", &["validate", line.to_str().unwrap()])), 2);
}

#[test]
fn bad_documents_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let malformed = dir.path().join("malformed.json");
    fs::write(&malformed, "{\"n\": 2,\n \"A\": [[0, 0.5], [0, 0]],\n \"gamma\": [0.5 0.5]}").unwrap();
    let o = rigidnet(&["validate", malformed.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let invalid = dir.path().join("invalid.json");
    fs::write(&invalid, r#"{"n": 2, "A": [[0, 1.2], [0, 0]], "gamma": [0.5, 0.5], "theta": [0, 0]}"#).unwrap();
    let o = rigidnet(&["validate", invalid.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("constant returns"), "{}", stderr(&o));

    assert_eq!(code(&rigidnet(&["validate", dir.path().join("missing.json").to_str().unwrap()])), 1);
}
