use std::process::{Command, Output};

fn ft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ft")).args(args).output().unwrap()
}

#[test]
fn run_writes_csv_to_stdout() {
    let out = ft(&["run", "--tree", "path", "--n", "12", "--adversary", "random", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("round,deleted,max_degree_increase,diameter"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn run_with_files_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.kv");
    std::fs::write(&cfg, "tree = star\ndelta = 10\nadversary = diameter_greedy:2\nstrategy = ft\nseed = 1\n").unwrap();
    let csv = dir.path().join("out.csv");
    let trace = dir.path().join("trace.jsonl");
    let out = ft(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--rounds",
        "4",
        "--out",
        csv.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--referee",
        "sampled",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);
    assert!(std::fs::read_to_string(&trace).unwrap().lines().count() > 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("trace hash"));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["run", "--tree", "hexagon"][..],
        &["run", "--adversary", "sneaky"],
        &["run", "--adversary", "diameter_greedy:0"],
        &["run", "--referee", "loud"],
        &["run", "--config", "/nonexistent.kv"],
        &["lowerbound", "--delta", "2"],
        &["frobnicate"],
    ] {
        assert_eq!(ft(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn lowerbound_prints_json() {
    let out = ft(&["lowerbound", "--delta", "64", "--strategy", "surrogate"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["delta"], 64);
    assert_eq!(v["alpha_measured"], 62);
    assert_eq!(v["satisfied"], true);
    let out = ft(&["lowerbound", "--delta", "256"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["ft_bound_ok"], true);
}

#[test]
fn small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.kv");
    std::fs::write(&cfg, "trees = star, balanced_kary\nsizes = 16\nadversaries = random, heir_hunter\nseeds = 0..2\n").unwrap();
    let out_dir = dir.path().join("cells");
    let out = ft(&["grid", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let agg = std::fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 9);
    assert_eq!(std::fs::read_dir(&out_dir).unwrap().count(), 9);
}
