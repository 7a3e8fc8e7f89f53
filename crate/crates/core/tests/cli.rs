use std::path::Path;
use std::process::{Command, Output};

fn mec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maritime-mec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().expect("utf-8 temp path").to_string()
}

#[test]
fn run_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = mec(&["run", "--seed", "4", "--slots", "300", "--out", &out_arg(dir.path())]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["summary.json", "slots.csv", "resolved_config.toml"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between identical runs");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 4);
    assert_eq!(summary["summary"]["slots"], 300);
}

#[test]
fn slots_csv_has_one_row_per_slot() {
    let dir = tempfile::tempdir().unwrap();
    let o = mec(&["run", "--slots", "40", "--policy", "lra", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let mut reader = csv::Reader::from_path(dir.path().join("slots.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "slot");
    assert!(header.iter().any(|h| h == "z_4"));
    assert!(header.iter().any(|h| h == "q_tu_9"));
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 40);
    for (t, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), header.len());
        assert_eq!(row[0].parse::<usize>().unwrap(), t);
    }
}

#[test]
fn sweep_writes_value_by_rep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = mec(&[
        "sweep",
        "--param",
        "control_v",
        "--values",
        "0.01,0.05,0.1,0.5,1",
        "--reps",
        "2",
        "--slots",
        "50",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "param",
            "value",
            "seed",
            "policy",
            "avg_throughput",
            "avg_latency",
            "avg_queue",
            "avg_energy",
            "final_Z_over_T",
            "violation_rate"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(&rows[0][1], "0.01");
    assert_eq!(&rows[9][1], "1.0");
}

#[test]
fn compare_covers_every_policy() {
    let dir = tempfile::tempdir().unwrap();
    let o = mec(&["compare", "--slots", "30", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let mut reader = csv::Reader::from_path(dir.path().join("compare.csv")).unwrap();
    let policies: Vec<String> = reader.records().map(|r| r.unwrap()[3].to_string()).collect();
    assert_eq!(policies, ["jcora", "fra", "lra", "pra", "tra"]);
}

#[test]
fn validate_certifies_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = mec(&["validate", "--instances", "100", "--seed", "1", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["certified"], 100);
    assert_eq!(report["instances"], 100);
}

#[test]
fn usage_and_config_errors_exit_nonzero() {
    assert_eq!(mec(&["run", "--policy", "best"]).status.code(), Some(1));
    assert_eq!(mec(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mec(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[control]\ncontrol_v = -2.0\n").unwrap();
    let o = mec(&["run", "--config", bad.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("control_v"));
}

#[test]
fn config_file_round_trips_through_resolved_copy() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let o = mec(&["run", "--slots", "20", "--seed", "11", "--out", &out_arg(&first)]);
    assert!(o.status.success());
    let resolved = first.join("resolved_config.toml");
    let second = dir.path().join("b");
    let o = mec(&["run", "--config", resolved.to_str().unwrap(), "--out", &out_arg(&second)]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(first.join("summary.json")).unwrap(),
        std::fs::read(second.join("summary.json")).unwrap()
    );
}
