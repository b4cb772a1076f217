use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn sppursuit(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sppursuit"))
        .arg("cluster")
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn scpp_writes_labels_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("voters.csv");
    let out = sppursuit(
        &["--input", input.to_str().unwrap(), "--label-col", "party", "--clusters", "2", "--microclusters", "100"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let labels = fs::read_to_string(dir.path().join("labels.csv")).unwrap();
    let mut lines = labels.lines();
    assert_eq!(lines.next(), Some("index,label"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 435);
    let distinct: std::collections::HashSet<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(distinct.len(), 2);

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["purity"].as_f64().unwrap() > 0.5);
    assert_eq!(metrics["per_split"].as_array().unwrap().len(), 1);
}

#[test]
fn lmsc_rejects_correlated_projection() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("voters.csv");
    let out = sppursuit(
        &["--input", input.to_str().unwrap(), "--label-col", "party", "--clusters", "2", "--method", "lmsc", "--proj", "correlated"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("labels.csv").exists());
}

#[test]
fn fixed_seed_reproduces_labels() {
    let input = fixture("breast_cancer.csv");
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = sppursuit(
            &["--input", input.to_str().unwrap(), "--label-col", "class", "--clusters", "3", "--seed", "7"],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(dir.path().join("labels.csv")).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn unreadable_input_exits_with_ingest_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,x\n2,3\n").unwrap();
    let out = sppursuit(&["--input", bad.to_str().unwrap(), "--clusters", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("missing.csv");
    let out = sppursuit(&["--input", missing.to_str().unwrap(), "--clusters", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
