use std::process::{Command, Output};

fn madc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_madc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bounds_comm_table() {
    let o = madc(&["bounds", "--lambda", "10", "--alpha", "2", "--mode", "comm"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1 + 9);
    assert!(out.lines().nth(1).unwrap().starts_with("10,2,1,2/5,0.4,4/15,"), "{out}");
}

#[test]
fn bounds_maxlink_point() {
    let o = madc(&[
        "bounds", "--lambda", "4", "--alpha", "2", "--r", "1", "--mode", "maxlink", "--format", "json",
    ]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows[0]["maxlink_ub"], "1/4");
    assert_eq!(rows[0]["maxlink_lb"], "5/24");
}

#[test]
fn bounds_invalid_r_is_usage_error() {
    let o = madc(&["bounds", "--lambda", "4", "--alpha", "2", "--r", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[1..3]"));
}

#[test]
fn simulate_golden() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let o = madc(&[
        "simulate",
        "--lambda",
        "4",
        "--alpha",
        "2",
        "--r",
        "1",
        "--n",
        "8",
        "--q",
        "12",
        "--transcript",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("L: measured 1/4 formula 1/4"), "{out}");
    assert!(out.contains("messages: 6"));
    assert!(out.trim_end().ends_with("PASS"));
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(t["messages"].as_array().unwrap().len(), 6);
}

#[test]
fn simulate_zero_load_corner() {
    let o = madc(&["simulate", "--lambda", "5", "--alpha", "2", "--r", "4"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("L: measured 0/1"));
}

#[test]
fn simulate_maxlink() {
    let o = madc(&["simulate", "--lambda", "6", "--alpha", "3", "--r", "2", "--maxlink"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("max(L, J): measured 4/15 formula 4/15"), "{out}");
    assert!(out.contains("links equalized: true"));
}

#[test]
fn simulate_bad_parameters() {
    let o = madc(&["simulate", "--lambda", "4", "--alpha", "2", "--r", "1", "--n", "7"]);
    assert_eq!(o.status.code(), Some(2));
    let o = madc(&[
        "simulate",
        "--lambda",
        "4",
        "--alpha",
        "2",
        "--r",
        "1",
        "--n",
        "8",
        "--maxlink",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_and_rejects_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let p = path.to_str().unwrap();
    let o = madc(&[
        "sweep", "--lambda", "4..5", "--alpha", "1,2", "--mode", "maxlink", "--output", p,
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 + 4 + 5 + 5);

    let empty = dir.path().join("e.csv");
    let o = madc(&[
        "sweep",
        "--lambda",
        "3",
        "--alpha",
        "5",
        "--output",
        empty.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!empty.exists());

    let o = madc(&["sweep", "--lambda", "3", "--output", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent-dir/x.csv"));
}

#[test]
fn verify_small_and_usage() {
    let o = madc(&["verify", "--max-lambda", "4"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("max ratio 3/2"));
    assert!(out.trim_end().ends_with("ALL PASS"));
    assert_eq!(madc(&["verify", "--max-lambda", "1"]).status.code(), Some(2));
}
