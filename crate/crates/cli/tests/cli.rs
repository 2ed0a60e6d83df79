use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlbench_core::datasets::read_dataset;

fn nlbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlbench"))
        .args(args)
        .env_remove("NLBENCH_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nlbench(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_writes_a_readable_eval_set() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.nlfb");
    ok(&[
        "generate", "--scenario", "lorenz96", "--role", "eval", "--n", "100", "--horizon", "500",
        "--seed", "7", "--out", s(&path),
    ]);
    let set = read_dataset(&path).unwrap();
    assert_eq!(set.len(), 100);
    assert_eq!(set.horizon(), Some(500));
    assert_eq!(set.config.name(), "lorenz96");
}

#[test]
fn missing_scenario_is_a_one_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlbench(&["generate", "--role", "eval", "--out", s(&dir.path().join("x.nlfb"))]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: invalid argument: --scenario"), "{err}");
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn unknown_flag_and_missing_file_are_one_line_errors() {
    for args in [
        vec!["generate", "--scenario", "mars", "--out", "x"],
        vec!["filter", "--dataset", "/nonexistent/d.nlfb", "--method", "ekf", "--out", "x"],
    ] {
        let out = nlbench(&args);
        assert!(!out.status.success());
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.starts_with("error: "));
    }
}

#[test]
fn quadrotor_eval_defaults_to_200_steps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.nlfb");
    ok(&["generate", "--scenario", "quadrotor", "--role", "eval", "--n", "2", "--out", s(&path)]);
    assert_eq!(read_dataset(&path).unwrap().horizon(), Some(200));
}

#[test]
fn generate_without_role_writes_three_disjoint_sets() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--scenario", "pendulum", "--n", "4", "--seed", "2", "--out", s(dir.path())]);
    let sets: Vec<_> = ["train", "val", "eval"]
        .iter()
        .map(|r| read_dataset(dir.path().join(format!("{r}.nlfb"))).unwrap())
        .collect();
    assert_eq!(sets[0].horizon(), Some(100));
    assert_eq!(sets[1].horizon(), Some(100));
    assert_eq!(sets[2].horizon(), Some(500));
    assert_ne!(sets[0].trajectories[0].states[0], sets[2].trajectories[0].states[0]);
}

#[test]
fn filter_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.nlfb");
    ok(&["generate", "--scenario", "bot", "--role", "eval", "--n", "3", "--out", s(&data)]);
    let out = dir.path().join("f");
    ok(&["filter", "--dataset", s(&data), "--method", "ukf", "--out", s(&out)]);
    let rows = csv_rows(&out.join("estimates.csv"));
    assert_eq!(rows.len(), 3 * 500);
    for traj in 0..3 {
        assert_eq!(rows.iter().filter(|r| r[0] == traj.to_string()).count(), 500);
    }
    assert_eq!(rows[0].len(), 2 + 4);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["diverged_trajectories"], 0);
    assert!(summary["rmse_avg"].as_f64().unwrap() > 0.0);
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("overrides.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn noiseless_data_started_from_truth_scores_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    // no process noise, exact prior, almost no sensor noise
    let cfg = write_config(
        dir.path(),
        r#"{"scenario": {"scenario": "ballistic", "process_std": [0, 0, 0], "init_std": [0, 0, 0], "range_std": 1e-6}}"#,
    );
    let data = dir.path().join("d.nlfb");
    ok(&[
        "generate", "--scenario", "ballistic", "--role", "eval", "--n", "3", "--horizon", "100",
        "--config", s(&cfg), "--out", s(&data),
    ]);
    let out = dir.path().join("e");
    ok(&[
        "evaluate", "--eval", s(&data), "--method", "ekf", "--init-seeds", "1", "--out", s(&out),
    ]);
    let rows = csv_rows(&out.join("runs.csv"));
    assert_eq!(rows.len(), 1);
    let rmse: f64 = rows[0][3].parse().unwrap();
    assert!(rmse < 1e-4, "{rmse}");
}

#[test]
fn breakdown_is_reported_as_infinity() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.nlfb");
    ok(&["generate", "--scenario", "bot", "--role", "eval", "--n", "2", "--horizon", "20", "--out", s(&data)]);
    // the assumed sensor noise underflows to zero, so the likelihood is undefined
    let out = dir.path().join("e");
    ok(&[
        "evaluate", "--eval", s(&data), "--method", "pf", "--np", "50", "--init-seeds", "2",
        "--noise-scale", "1e-200", "--out", s(&out),
    ]);
    for row in csv_rows(&out.join("runs.csv")) {
        assert_eq!(row[2], "2");
        assert!(row[3..].iter().all(|v| v == "inf"), "{row:?}");
    }
    let agg = csv_rows(&out.join("aggregate.csv"));
    assert!(agg.iter().all(|r| r[2] == "inf"));
    assert_eq!(json(&out.join("summary.json"))["pf.rmse_avg.median"], "inf");
}

#[test]
fn evaluate_emits_aggregate_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let mut sets = Vec::new();
    for seed in ["1", "2", "3"] {
        let p = dir.path().join(format!("eval{seed}.nlfb"));
        ok(&[
            "generate", "--scenario", "pendulum", "--role", "eval", "--n", "3", "--horizon", "40",
            "--seed", seed, "--out", s(&p),
        ]);
        sets.push(p);
    }
    let out = dir.path().join("e");
    let mut args = vec!["evaluate", "--eval"];
    args.extend(sets.iter().map(|p| s(p)));
    args.extend(["--method", "ekf,enkf", "--ensemble", "20", "--out", s(&out)]);
    ok(&args);

    let runs = csv_rows(&out.join("runs.csv"));
    assert_eq!(runs.len(), 2 * 15);
    let agg = csv_rows(&out.join("aggregate.csv"));
    assert_eq!(agg.len(), 2 * 5);
    assert!(agg.iter().all(|r| r[6] == "15"));
    for m in ["ekf", "enkf"] {
        let curve = csv_rows(&out.join(format!("curve_{m}.csv")));
        assert_eq!(curve.len(), 40);
        for r in &curve {
            let (med, q1, q3): (f64, f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
            assert!(q1 <= med && med <= q3);
        }
    }
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["ekf.runs"], 15);
    assert!(summary["enkf.rmse_avg.ci95"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_matches_evaluate_at_unit_noise() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.nlfb");
    ok(&[
        "generate", "--scenario", "lorenz96", "--role", "eval", "--n", "4", "--horizon", "60",
        "--seed", "5", "--out", s(&data),
    ]);
    let eval = dir.path().join("e");
    ok(&[
        "evaluate", "--eval", s(&data), "--method", "ukf,enkf", "--ensemble", "30",
        "--init-seeds", "1", "--out", s(&eval),
    ]);
    let sweep = dir.path().join("s");
    ok(&[
        "sweep-noise", "--scenario", "lorenz96", "--method", "ukf,enkf", "--ensemble", "30",
        "--n", "4", "--horizon", "60", "--seed", "5", "--out", s(&sweep),
    ]);
    let rows = csv_rows(&sweep.join("sweep.csv"));
    assert_eq!(rows.len(), 5 * 2);
    let snr: Vec<f64> = rows.iter().step_by(2).map(|r| r[1].parse().unwrap()).collect();
    assert!(snr.windows(2).all(|w| w[1] < w[0]), "{snr:?}");

    let evaluated = csv_rows(&eval.join("runs.csv"));
    for method in ["ukf", "enkf"] {
        let at_one = rows.iter().find(|r| r[0] == "1" && r[2] == method).unwrap();
        let from_eval = evaluated.iter().find(|r| r[0] == method).unwrap();
        assert_eq!(at_one[3], from_eval[3], "{method}");
    }
}

#[test]
fn training_twice_gives_identical_model_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    ok(&["generate", "--scenario", "pendulum", "--n", "16", "--horizon", "30", "--seed", "3", "--out", s(&data)]);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&[
            "train", "--train", s(&data.join("train.nlfb")), "--val", s(&data.join("val.nlfb")),
            "--hidden", "6", "--epochs", "4", "--patience", "2", "--seed", "11", "--out", s(&out),
        ]);
        files.push(fs::read(out.join("model.nlfm")).unwrap());
        assert_eq!(
            fs::read_to_string(out.join("history.csv")).unwrap().lines().count(),
            1 + 5
        );
    }
    assert_eq!(files[0], files[1]);

    // the trained network runs through filter and evaluate
    let f = dir.path().join("f");
    let model = dir.path().join("a").join("model.nlfm");
    ok(&["filter", "--dataset", s(&data.join("eval.nlfb")), "--method", "gru", "--model", s(&model), "--out", s(&f)]);
    assert_eq!(csv_rows(&f.join("estimates.csv")).len(), 16 * 30);
}

#[test]
fn bench_single_method_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "bench", "--scenario", "bot", "--method", "pf", "--np", "1000", "--warmup", "2",
        "--iters", "100", "--out", s(dir.path()),
    ]);
    let rows = csv_rows(&dir.path().join("throughput.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..4], ["pf", "bot", "1", "serial"]);
    assert!(rows[0][4].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn config_for_another_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"scenario": {"scenario": "bot"}}"#);
    let out = nlbench(&[
        "generate", "--scenario", "pendulum", "--role", "eval", "--config", s(&cfg), "--out",
        s(&dir.path().join("x.nlfb")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("overrides scenario 'bot'"));
}
