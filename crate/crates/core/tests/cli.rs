//! End-to-end checks of the command-line interface: exit codes, output
//! files, and the side-by-side counterexample report.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedmuon"))
}

const GOOD_CONFIG: &str = r#"
    [problem]
    kind = "counterexample"

    [round]
    algorithm = "fed_muon"
    n = 2
    s = 2
    k = 1
    eta = 0.01
    alpha = 0.5
    norm = "euclidean_vec"
    lmo = { kind = "exact" }

    [run]
    rounds = 100
"#;

#[test]
fn run_executes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, GOOD_CONFIG).unwrap();
    let out = dir.path().join("out");
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    assert!(out.join("trace_seed0.jsonl").exists());
    assert!(out.join("summary.csv").exists());
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, GOOD_CONFIG.replace("rounds = 100", "rounds = 100\nwat = 1")).unwrap();
    let out = dir.path().join("out");
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("wat"), "error should name the offending key: {stderr}");
    assert!(!out.exists(), "no output files may be created on config errors");
}

#[test]
fn numerical_blowup_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        r#"
        [problem]
        kind = "matrix_quadratic"
        clients = 4
        d1 = 6
        d2 = 4

        [round]
        algorithm = "fed_avg"
        n = 4
        s = 4
        k = 5
        eta = 1e6

        [run]
        rounds = 500
        "#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("non-finite"), "{stderr}");
}

#[test]
fn missing_config_file_fails() {
    let output = bin().args(["run", "--config", "/nonexistent/nope.toml"]).output().unwrap();
    assert!(!output.status.success());
}

#[test]
fn verify_passes_on_fresh_build() {
    let output = bin().arg("verify").output().unwrap();
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("0 failed"), "{stdout}");
    assert!(!stdout.contains("[FAIL]"));
}

#[test]
fn counterexample_report_shows_floor_and_escape() {
    let output = bin()
        .args(["counterexample", "--a", "1.0", "--alpha", "0.5", "--rounds", "500"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("0.0625"), "floor missing: {stdout}");
    assert!(stdout.contains("pinned at the floor: true"), "{stdout}");
    // the fedmuon column must dip under the floor
    let min_line = stdout.lines().find(|l| l.contains("fedmuon min")).unwrap();
    let min: f64 = min_line.rsplit(' ').next().unwrap().trim().parse().unwrap();
    assert!(min < 0.0625, "fedmuon min {min} not below the floor");
}

#[test]
fn counterexample_scales_floor_with_offset() {
    let output = bin()
        .args(["counterexample", "--a", "2.0", "--rounds", "200"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("a^2/16 = 0.25"), "{stdout}");
}

#[test]
fn grid_ranks_cells_and_honors_workers_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        GOOD_CONFIG.to_string() + "\n[grid]\neta = [0.01, 0.001]\neta_aux = [0.01]\n",
    )
    .unwrap();
    let out = dir.path().join("grid");
    let output = bin()
        .args(["grid", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--workers", "2"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let leaderboard = std::fs::read_to_string(out.join("leaderboard.csv")).unwrap();
    assert_eq!(leaderboard.lines().count(), 3);
    assert!(out.join("cell000").join("trace_seed0.jsonl").exists());
    assert!(out.join("cell001").join("trace_seed0.jsonl").exists());
}

#[test]
fn example_configs_are_valid() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            fedmuon::config::ExperimentConfig::load(&path)
                .unwrap_or_else(|e| panic!("{path:?}: {e}"));
        }
    }
}
