//! End-to-end checks of the `coevo` binary: exit codes, output files, config
//! echo round-trips, and the documented CSV shapes.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_coevo")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

const BASE_CONFIG: &str = r#"
[influence]
family = "rr"
n = 24
d = 6

[communication]
family = "rr"
n = 24
d = 4

[scenario]
alpha = 0.5
beta = 20.0
lambda = 0.15
mu = 0.002
horizon = 2000
master_seed = 3
replicates = 3

[grids]
lambda = [0.0, 0.3]
mu = [0.0, 0.004]
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_json_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            let name = path.file_name().unwrap().to_str().unwrap().to_string();
            if name.ends_with(".csv") || name.ends_with(".json") {
                files.insert(name, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn simulate_writes_the_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE_CONFIG);
    let out = dir.path().join("run");
    let output = run(&["simulate", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    for file in ["trajectory.csv", "final_state.csv", "theory_report.json", "summary.json",
        "resolved_config.toml"]
    {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,avg_x,avg_y"));
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,"), "first row is t = 0: {first}");
    // cadence defaults to n, plus the final row
    assert_eq!(traj.lines().count(), 1 + 2000 / 24 + 2);

    let state = std::fs::read_to_string(out.join("final_state.csv")).unwrap();
    assert_eq!(state.lines().count(), 25);
    assert_eq!(state.lines().next(), Some("node,x,y"));

    let theory: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("theory_report.json")).unwrap())
            .unwrap();
    assert_eq!(theory["d_star"], 6);
    assert!(theory["lambda_star"].as_f64().unwrap() > 0.0);

    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("regime="), "stdout: {stdout}");
}

#[test]
fn simulate_horizon_zero_gives_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE_CONFIG.replace("horizon = 2000", "horizon = 0"));
    let out = dir.path().join("run");
    assert!(run(&["simulate", &cfg, "--out-dir", out.to_str().unwrap()]).status.success());
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = traj.lines().collect();
    assert_eq!(rows.len(), 2);
    // all agents at -1 except the innovator
    assert!(rows[1].starts_with("0,-9.16666667e-1,"), "{}", rows[1]);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE_CONFIG);
    let out_a = dir.path().join("a");
    assert!(run(&["simulate", &cfg, "--out-dir", out_a.to_str().unwrap()]).status.success());

    // rerun from the echoed resolved config into a fresh directory
    let echoed = out_a.join("resolved_config.toml");
    let out_b = dir.path().join("b");
    assert!(run(&[
        "simulate",
        echoed.to_str().unwrap(),
        "--out-dir",
        out_b.to_str().unwrap()
    ])
    .status
    .success());
    assert_eq!(csv_json_files(&out_a), csv_json_files(&out_b));
}

#[test]
fn estimate_threshold_outputs_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE_CONFIG);
    let out = dir.path().join("est");
    let output = run(&["estimate-threshold", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(output.status.success());
    let variance = std::fs::read_to_string(out.join("variance_curve.csv")).unwrap();
    assert_eq!(variance.lines().next(), Some("lambda,variance,mean_fraction"));
    assert_eq!(variance.lines().count(), 3); // header + 2 grid points
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next(), Some("lambda,mu,replicate,seed,avg_x,avg_y,regime"));
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["lambda_hat"].is_number());

    // --seed beats the file value: outputs must change
    let out2 = dir.path().join("est2");
    assert!(run(&[
        "estimate-threshold",
        &cfg,
        "--out-dir",
        out2.to_str().unwrap(),
        "--seed",
        "12345"
    ])
    .status
    .success());
    let sweep2 = std::fs::read_to_string(out2.join("sweep.csv")).unwrap();
    assert_ne!(sweep, sweep2, "--seed override had no effect");
    let echo = std::fs::read_to_string(out2.join("resolved_config.toml")).unwrap();
    assert!(echo.contains("master_seed = 12345"), "echo must carry the override");
}

#[test]
fn echoed_sweep_config_reproduces_grid_seeds() {
    // range grids are echoed as explicit values; the f64 round trip must be
    // bit-exact so every cell keeps its derived seed stream
    let dir = tempfile::tempdir().unwrap();
    let ranged = BASE_CONFIG.replace(
        "lambda = [0.0, 0.3]",
        "lambda = { start = 0.0, stop = 0.06, step = 0.02 }",
    );
    let cfg = write_config(dir.path(), &ranged);
    let out_a = dir.path().join("a");
    assert!(run(&["estimate-threshold", &cfg, "--out-dir", out_a.to_str().unwrap()])
        .status
        .success());
    let out_b = dir.path().join("b");
    assert!(run(&[
        "estimate-threshold",
        out_a.join("resolved_config.toml").to_str().unwrap(),
        "--out-dir",
        out_b.to_str().unwrap()
    ])
    .status
    .success());
    assert_eq!(csv_json_files(&out_a), csv_json_files(&out_b));
}

#[test]
fn estimate_threshold_needs_two_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE_CONFIG.replace("replicates = 3", "replicates = 1"));
    let output = run(&["estimate-threshold", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("scenario.replicates"), "stderr: {err}");
}

#[test]
fn sweep2d_covers_the_grid_and_reports_lambda_hat_when_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE_CONFIG);
    let out = dir.path().join("sweep");
    assert!(run(&["sweep2d", &cfg, "--out-dir", out.to_str().unwrap()]).status.success());
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 2 * 3); // header + cells * replicates
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cells"].as_array().unwrap().len(), 4);
    assert!(summary.get("lambda_hat").is_none(), "2-d sweeps have no threshold");

    // degenerate mu grid turns the sweep into a threshold experiment
    let subdir = dir.path().join("cfg1d");
    std::fs::create_dir_all(&subdir).unwrap();
    let cfg1d = write_config(&subdir, &BASE_CONFIG.replace("mu = [0.0, 0.004]", "mu = [0.002]"));
    let out1d = dir.path().join("sweep1d");
    assert!(run(&["sweep2d", &cfg1d, "--out-dir", out1d.to_str().unwrap()]).status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1d.join("summary.json")).unwrap())
            .unwrap();
    assert!(summary["lambda_hat"].is_number());
}

#[test]
fn trajectories_flag_writes_per_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let with_traj = format!("{BASE_CONFIG}\n[output]\ntrajectories = true\n");
    let cfg = write_config(dir.path(), &with_traj);
    let out = dir.path().join("sweep");
    assert!(run(&["sweep2d", &cfg, "--out-dir", out.to_str().unwrap()]).status.success());
    let traj_dir = out.join("trajectories");
    let count = std::fs::read_dir(&traj_dir).unwrap().count();
    assert_eq!(count, 2 * 2 * 3, "one trajectory per (cell, replicate)");
    let any = std::fs::read_dir(&traj_dir).unwrap().next().unwrap().unwrap().path();
    let body = std::fs::read_to_string(any).unwrap();
    assert_eq!(body.lines().next(), Some("t,avg_x,avg_y"));
}

#[test]
fn theory_check_reports_exclusion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE_CONFIG);
    let out = dir.path().join("theory");
    let output = run(&["theory-check", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("theory_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["d_star"], 6);
    assert_eq!(report["alpha"], 0.5);
    // d* = 6, alpha = 0.5: lambda* = 1/2 - 2.5/19
    let ls = report["lambda_star"].as_f64().unwrap();
    assert!((ls - (0.5 - 2.5 / 19.0)).abs() < 1e-12);
    assert_eq!(report["paradigm_shift_excluded"], true); // lambda = 0.15 < ls
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("d_star=6"), "stdout: {stdout}");
}

#[test]
fn generate_writes_edge_list_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.edges");
    let output = run(&[
        "generate", "--family", "rr", "--n", "200", "--d", "8", "--seed", "7", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let body = std::fs::read_to_string(&out).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("n=200"));
    assert_eq!(body.lines().count(), 801); // header + nd/2 edges
    for line in body.lines().skip(1) {
        let mut it = line.split(' ');
        let i: usize = it.next().unwrap().parse().unwrap();
        let j: usize = it.next().unwrap().parse().unwrap();
        assert!(i < j && j < 200);
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("edges=800"));
    assert!(stdout.contains("degree_min=8 degree_mean=8 degree_max=8"));
}

#[test]
fn config_errors_exit_one_with_the_key_name() {
    let dir = tempfile::tempdir().unwrap();

    let bad_key = write_config(dir.path(), &format!("{BASE_CONFIG}\nunexpected_table = 1\n"));
    let output = run(&["simulate", &bad_key]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("unexpected_table"));

    let bad_value =
        write_config(dir.path(), &BASE_CONFIG.replace("lambda = 0.15", "lambda = 7.0"));
    let output = run(&["simulate", &bad_value]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("scenario.lambda"));

    let bad_spec = run(&["generate", "--family", "ws", "--n", "10", "--d", "4"]);
    assert_eq!(bad_spec.status.code(), Some(1), "ws without p is a config error");

    let missing = run(&["simulate", "/nonexistent/config.toml"]);
    assert_eq!(missing.status.code(), Some(2), "unreadable config is a runtime error");
}

#[test]
fn beta_inf_round_trips_through_config_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &BASE_CONFIG.replace("beta = 20.0", "beta = \"inf\"").replace("lambda = 0.15", "lambda = 0.1"),
    );
    let out = dir.path().join("run");
    assert!(run(&["simulate", &cfg, "--out-dir", out.to_str().unwrap()]).status.success());
    let echo = std::fs::read_to_string(out.join("resolved_config.toml")).unwrap();
    assert!(echo.contains("beta = \"inf\""), "echo: {echo}");
    // under exclusion (lambda 0.1 < lambda*) nothing ever adopts
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let expected = format!("{},", coevo::report::fmt_sig9(-1.0 + 2.0 / 24.0));
    for line in traj.lines().skip(1) {
        let after_t = line.split_once(',').unwrap().1;
        assert!(after_t.starts_with(&expected), "row {line}");
    }
}
