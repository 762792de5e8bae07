// SPDX-License-Identifier: Apache-2.0

//! End-to-end tests of the command-line interface: exit codes, artifact
//! formats, determinism, and config handling.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forcetrack::Scenario;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_forcetrack")
}

fn bench_scenario_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/optomech.toml")
}

fn bench_scenario_text() -> String {
    std::fs::read_to_string(bench_scenario_path()).unwrap()
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_csv_with_documented_header_and_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "run",
        "--config",
        bench_scenario_path().to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(tmp.path().join("run.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,t,q_true,p_true,q_est,p_est,y,f_true,f_est,f_err,mse_theory"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1000);
    // Force columns are empty on the final row only.
    assert!(rows[999].ends_with(",,,,"));
    assert!(!rows[998].ends_with(",,,,"));
}

#[test]
fn csv_numbers_round_trip_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let text = bench_scenario_text().replace("steps = 1000", "steps = 50");
    let config = write_scenario(tmp.path(), &text);
    let out = run_cli(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let csv = std::fs::read_to_string(tmp.path().join("run.csv")).unwrap();
    for line in csv.lines().skip(1) {
        for field in line.split(',').skip(1) {
            if field.is_empty() {
                continue;
            }
            let value: f64 = field.parse().unwrap();
            assert_eq!(format!("{value}"), field, "field {field} not shortest form");
        }
    }
}

#[test]
fn identical_configs_produce_byte_identical_artifacts() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    for tmp in [&tmp_a, &tmp_b] {
        let out = run_cli(&[
            "run",
            "--config",
            bench_scenario_path().to_str().unwrap(),
            "--out",
            tmp.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let out = run_cli(&[
            "montecarlo",
            "--config",
            bench_scenario_path().to_str().unwrap(),
            "--runs",
            "20",
            "--out",
            tmp.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for name in ["run.csv", "accuracy.csv"] {
        let a = std::fs::read(tmp_a.path().join(name)).unwrap();
        let b = std::fs::read(tmp_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical invocations");
    }
}

#[test]
fn seed_override_changes_the_data() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    for (tmp, seed) in [(&tmp_a, "1"), (&tmp_b, "2")] {
        let out = run_cli(&[
            "run",
            "--config",
            bench_scenario_path().to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            tmp.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let a = std::fs::read(tmp_a.path().join("run.csv")).unwrap();
    let b = std::fs::read(tmp_b.path().join("run.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn montecarlo_serial_flag_is_byte_identical_to_parallel() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "montecarlo",
        "--config",
        bench_scenario_path().to_str().unwrap(),
        "--runs",
        "16",
        "--out",
        tmp_a.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = run_cli(&[
        "montecarlo",
        "--config",
        bench_scenario_path().to_str().unwrap(),
        "--runs",
        "16",
        "--serial",
        "--out",
        tmp_b.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let a = std::fs::read(tmp_a.path().join("accuracy.csv")).unwrap();
    let b = std::fs::read(tmp_b.path().join("accuracy.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn montecarlo_accuracy_header_and_alignment() {
    let tmp = tempfile::tempdir().unwrap();
    let text = bench_scenario_text().replace("steps = 1000", "steps = 120");
    let config = write_scenario(tmp.path(), &text);
    let out = run_cli(&[
        "montecarlo",
        "--config",
        config.to_str().unwrap(),
        "--runs",
        "8",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(tmp.path().join("accuracy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,t,mse_theory,v_numerical,ratio,bias_f");
    // One row per force step: steps - 1.
    assert_eq!(lines.count(), 119);
}

#[test]
fn identical_seeds_flag_collapses_the_ensemble() {
    let tmp = tempfile::tempdir().unwrap();
    let text = bench_scenario_text().replace("steps = 1000", "steps = 60");
    let config = write_scenario(tmp.path(), &text);
    let out = run_cli(&[
        "montecarlo",
        "--config",
        config.to_str().unwrap(),
        "--runs",
        "2",
        "--identical-seeds",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let run_out = run_cli(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(run_out.status.success());

    let accuracy = std::fs::read_to_string(tmp.path().join("accuracy.csv")).unwrap();
    let run = std::fs::read_to_string(tmp.path().join("run.csv")).unwrap();
    let f_err: Vec<f64> = run
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(9).filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()))
        .collect();
    for (k, line) in accuracy.lines().skip(1).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let v_n: f64 = fields[3].parse().unwrap();
        assert_eq!(v_n, f_err[k] * f_err[k], "step {k}");
    }
}

#[test]
fn summary_config_echo_reparses_to_an_equivalent_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "run",
        "--config",
        bench_scenario_path().to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    let echoed: Scenario = serde_json::from_value(summary["config"].clone()).unwrap();
    // The echo reflects the effective configuration, overrides included.
    assert_eq!(echoed.experiment.seed, 99);
    assert_eq!(summary["seed"], 99);
    let reparsed = Scenario::from_toml_str(&echoed.to_toml_string().unwrap()).unwrap();
    assert_eq!(echoed, reparsed);
}

#[test]
fn missing_dt_is_a_config_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let text = bench_scenario_text().replace("dt = 1e-4", "");
    let config = write_scenario(tmp.path(), &text);
    let out = run_cli(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("dt"), "stderr: {stderr}");
}

#[test]
fn zero_noise_intensity_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = bench_scenario_text().replace("noise_intensity = 1e-14", "noise_intensity = 0.0");
    let config = write_scenario(tmp.path(), &text);
    let out = run_cli(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn raw_model_with_zero_r0_names_the_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[model]
kind = "raw"
a0 = [[0.0, 1.0], [-1.0, 0.0]]
b0 = [[0.0], [1.0]]
h0 = [[1.0, 0.0]]
q0 = [[0.0, 0.0], [0.0, 1.0]]
r0 = [[0.0]]

[discretization]
dt = 0.1

[force]
kind = "constant"
value = 1.0

[filter]
init = "truth"

[experiment]
steps = 10
seed = 1
x0 = [0.0, 0.0]
"#;
    let config = write_scenario(tmp.path(), text);
    let out = run_cli(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("R0 not positive definite"), "stderr: {stderr}");
}

#[test]
fn infeasible_model_exits_with_code_two() {
    // The force drives only the unobserved component: H B = 0.
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[model]
kind = "raw"
a0 = [[0.0, 0.0], [0.0, 0.0]]
b0 = [[0.0], [1.0]]
h0 = [[1.0, 0.0]]
q0 = [[0.0, 0.0], [0.0, 1.0]]
r0 = [[1.0]]

[discretization]
dt = 0.1

[force]
kind = "constant"
value = 1.0

[filter]
init = "truth"

[experiment]
steps = 10
seed = 1
x0 = [0.0, 0.0]
"#;
    let config = write_scenario(tmp.path(), text);
    let out = run_cli(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("unbiased input estimation infeasible"),
        "stderr: {stderr}"
    );
}

#[test]
fn montecarlo_rejects_single_run_ensembles() {
    let out = run_cli(&[
        "montecarlo",
        "--config",
        bench_scenario_path().to_str().unwrap(),
        "--runs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn force_file_is_resolved_and_exhaustion_reported() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("force.txt"), "1.0\n2.0\n3.0\n").unwrap();
    let text = bench_scenario_text()
        .replace(
            "kind = \"gaussian_iid\"\nmean = 1.0\nvariance = 0.5",
            "kind = \"from_file\"\npath = \"force.txt\"",
        )
        .replace("steps = 1000", "steps = 4");
    let config = write_scenario(tmp.path(), &text);
    let out = run_cli(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // One step more than the file provides.
    let text = text.replace("steps = 4", "steps = 5");
    let config = write_scenario(tmp.path(), &text);
    let out = run_cli(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("exhausted"), "stderr: {stderr}");
}

#[test]
fn discretize_prints_all_matrices() {
    let out = run_cli(&[
        "discretize",
        "--config",
        bench_scenario_path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["A (2x2)", "B (2x1)", "H (1x2)", "Q (2x2)", "R (1x1)"] {
        assert!(stdout.contains(name), "missing {name} in output");
    }
    // 17 significant digits, matching the closed-form oscillator values:
    // A[0][0] = cos(omega_m * dt).
    assert!(stdout.contains("3.1574375491924"), "A entry mismatch:\n{stdout}");
    assert!(stdout.contains("9.9999999999999991e-11"), "R entry mismatch:\n{stdout}");
}

#[test]
fn discretize_zero_drift_prints_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[model]
kind = "raw"
a0 = [[0.0, 0.0], [0.0, 0.0]]
b0 = [[0.0], [1.0]]
h0 = [[0.0, 1.0]]
q0 = [[0.0, 0.0], [0.0, 1.0]]
r0 = [[1.0]]

[discretization]
dt = 0.1

[force]
kind = "constant"
value = 1.0

[filter]
init = "truth"

[experiment]
steps = 10
seed = 1
x0 = [0.0, 0.0]
"#;
    let config = write_scenario(tmp.path(), text);
    let out = run_cli(&["discretize", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("1.0000000000000000e0"));
}

#[test]
fn malformed_matrix_dimensions_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[model]
kind = "raw"
a0 = [[0.0, 1.0]]
b0 = [[0.0], [1.0]]
h0 = [[1.0, 0.0]]
q0 = [[0.0, 0.0], [0.0, 1.0]]
r0 = [[1.0]]

[discretization]
dt = 0.1

[force]
kind = "constant"
value = 1.0

[filter]
init = "truth"

[experiment]
steps = 10
seed = 1
x0 = [0.0, 0.0]
"#;
    let config = write_scenario(tmp.path(), text);
    let out = run_cli(&["discretize", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
