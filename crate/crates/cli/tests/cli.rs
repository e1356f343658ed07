use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn svsmooth(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.txt");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_svsmooth"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .env_remove("SVSMOOTH_BUDGET_SECONDS")
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn meta(dir: &Path, command: &str) -> Value {
    serde_json::from_str(&read(dir, &format!("{command}.meta.json"))).unwrap()
}

const TAIL: &str = "command = tail-sweep\nn = 6\ndistribution = rademacher\nepsilons = 0.01, 0.1, 0.5\ntrials = 3000\nseed = 7\n";

#[test]
fn tail_sweep_writes_one_row_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let out = svsmooth(dir.path(), TAIL, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "tail-sweep.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epsilon,trials,successes,p_hat,ci_low,ci_high");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1.0000000000000000e-2,3000,"));
    let m = meta(dir.path(), "tail-sweep");
    assert_eq!(m["command"], "tail-sweep");
    assert_eq!(m["master_seed"], 7);
    assert_eq!(m["truncated"], false);
    assert_eq!(m["config"]["epsilons"], "0.01, 0.1, 0.5");
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["versions"]["svsmooth-cli"].is_string());
}

#[test]
fn reruns_and_worker_counts_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for workers in ["1", "4", "1"] {
        let out = svsmooth(dir.path(), TAIL, &["--workers", workers]);
        assert!(out.status.success());
        csvs.push(read(dir.path(), "tail-sweep.csv"));
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
    let out = svsmooth(dir.path(), TAIL, &["--seed", "8"]);
    assert!(out.status.success());
    assert_ne!(read(dir.path(), "tail-sweep.csv"), csvs[0]);
    assert_eq!(meta(dir.path(), "tail-sweep")["config"]["seed"], "8");
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = distance-check\nn = 5\ndistribution = lazy_rademacher\ndelta = 0.2\nrho = 0.3\nepsilon = 0.2\ntrials = 2000\n";
    assert!(svsmooth(dir.path(), cfg, &["--seed", "42"]).status.success());
    let first = read(dir.path(), "distance-check.csv");
    let echo = read(dir.path(), "distance-check.meta.json");
    let second_dir = tempfile::tempdir().unwrap();
    let out = svsmooth(second_dir.path(), &echo, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(second_dir.path(), "distance-check.csv"), first);
}

#[test]
fn counterexample_desk_config_meets_the_floor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = counterexample\nn = 16\nt = 1\nK = auto\nk_trials = 2000\nL = auto\nC = 1, 2\ntrials = 4000\nseed = 1\n";
    let out = svsmooth(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "counterexample.csv");
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let p_hat: f64 = row[4].parse().unwrap();
        let floor: f64 = row[7].parse().unwrap();
        assert!(p_hat >= floor, "{row:?}");
        assert_eq!(row[8], "true");
    }
    let m = meta(dir.path(), "counterexample");
    assert!(m["summary"]["K"].as_f64().unwrap() > 1.0);
    assert_eq!(m["check"]["passed"], true);
}

#[test]
fn failed_check_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // A threshold far below every draw's s_n against a floor of 2.5e5.
    let cfg = "command = counterexample\nn = 8\nK = 2\nL = auto\nC = 1e-6\ntrials = 500\n";
    let out = svsmooth(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAILED"));
    assert_eq!(meta(dir.path(), "counterexample")["check"]["passed"], false);
}

#[test]
fn invalid_configs_exit_with_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = svsmooth(dir.path(), "command = tail-sweep\nepsilons = 0.1\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`n`: missing required key"), "{err}");

    let out = svsmooth(dir.path(), "command = counterexample\nn = 64\nK = 2\nL = 5\nC = 1\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("L ≥ 2K√n"));

    let out = svsmooth(dir.path(), "command = lcd\nvector = 1, 0\nalpha = 10\ngamma = 0.5\ncolour = red\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`colour`"));

    let out = svsmooth(dir.path(), "command = lcd\nvector = 1, 0\nalpha = 10\ngamma = 0.5\n", &["--workers", "0"]);
    assert_eq!(out.status.code(), Some(1));

    let out = svsmooth(dir.path(), "command = lcd\nvector = 1, 0\nalpha = 10\ngamma = 0.5\n", &["--check-config"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("lcd.csv").exists());

    let out = Command::new(env!("CARGO_BIN_EXE_svsmooth")).arg("--bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn budget_truncates_and_flags_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.txt");
    std::fs::write(&path, "command = tail-sweep\nn = 40\nepsilons = 0.01\ntrials = 1000000\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_svsmooth"))
        .args(["--workers", "1", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .env("SVSMOOTH_BUDGET_SECONDS", "0")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = meta(dir.path(), "tail-sweep");
    assert_eq!(m["truncated"], true);
    let csv = read(dir.path(), "tail-sweep.csv");
    let trials: u64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(trials > 0 && trials < 1_000_000);
}

#[test]
fn single_shot_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = svsmooth(dir.path(), "command = lcd\nvector = 1, 0\nalpha = 10\ngamma = 0.5\n", &[]);
    assert!(out.status.success());
    let csv = read(dir.path(), "lcd.csv");
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "found");
    assert!((row[2].parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-6);

    let out = svsmooth(dir.path(), "command = classify\nvector = 1, 0, 0, 0\ndelta = 0.25\nrho = 0.1\n", &[]);
    assert!(out.status.success());
    assert!(read(dir.path(), "classify.csv").contains(",compressible"));

    let out = svsmooth(dir.path(), "command = lattice\nwidths = 2, 2\ncenter = 0.5, 0.5\n", &[]);
    assert!(out.status.success());
    assert_eq!(read(dir.path(), "lattice.csv").lines().nth(1).unwrap().split(',').nth(1), Some("4"));

    let out = svsmooth(dir.path(), "command = cover\nsemiaxes = 1, 3, 0.5\naxes = random\nsamples = 5000\nseed = 2\n", &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(read(dir.path(), "cover.csv").ends_with(",5000,0\n"));

    let out = svsmooth(dir.path(), "command = net\nn = 2\nD = 3\nmu = 0.5\ngamma = 0.1\nsamples = 200\n", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = svsmooth(dir.path(), "command = opnorm-quantile\nn = 10\nq = 0.5, 0.9\ntrials = 500\n", &[]);
    assert!(out.status.success());
    let csv = read(dir.path(), "opnorm-quantile.csv");
    let vals: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(vals[0] <= vals[1] && vals[0] > 1.0);

    let out = svsmooth(dir.path(), "command = event-e\nn = 3, 5\nK = 2\nL = 100\nC = 4\ntrials = 2000\n", &[]);
    assert!(out.status.success());
    assert_eq!(read(dir.path(), "event-e.csv").lines().count(), 3);
}
