//! End-to-end checks of the command-line binary: CSV input handling, JSON
//! output, seed reproducibility, and the exit-code contract
//! (1 = usage error, 2 = data error).

use std::io::Write as _;
use std::process::Command;

fn truh_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_truh"))
}

fn write_gaussian_csv(path: &std::path::Path, n: usize, d: usize, mean: f64, seed: u64) {
    let mut rng = truh::RngStream::new(seed, &[]);
    let mut f = std::fs::File::create(path).unwrap();
    writeln!(f, "{}", (0..d).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",")).unwrap();
    for _ in 0..n {
        let row: Vec<String> = (0..d).map(|_| format!("{}", mean + rng.normal())).collect();
        writeln!(f, "{}", row.join(",")).unwrap();
    }
}

#[test]
fn test_subcommand_runs_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let baseline = dir.path().join("baseline.csv");
    let cases = dir.path().join("cases.csv");
    write_gaussian_csv(&baseline, 200, 3, 0.0, 1);
    write_gaussian_csv(&cases, 30, 3, 0.0, 2);
    let out = dir.path().join("result.json");

    let output = truh_bin()
        .args(["test", "--uninfected"])
        .arg(&baseline)
        .arg("--infected")
        .arg(&cases)
        .args(["--seed", "11", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("seed: 11"), "stdout: {stdout}");
    assert!(stdout.contains("REJECT"), "stdout: {stdout}");

    let result = truh::load_result_json(&out).unwrap();
    assert_eq!(result.m, 200);
    assert_eq!(result.n, 30);
    assert_eq!(result.d, 3);
    assert_eq!(result.seed, 11);
}

#[test]
fn same_seed_gives_identical_json_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let baseline = dir.path().join("baseline.csv");
    let cases = dir.path().join("cases.csv");
    write_gaussian_csv(&baseline, 150, 2, 0.0, 3);
    write_gaussian_csv(&cases, 25, 2, 1.0, 4);

    let run = |out: &std::path::Path| {
        let status = truh_bin()
            .args(["test", "--uninfected"])
            .arg(&baseline)
            .arg("--infected")
            .arg(&cases)
            .args(["--seed", "42", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = run(&dir.path().join("a.json"));
    let b = run(&dir.path().join("b.json"));
    assert_eq!(a, b, "identical seeds must produce byte-identical result files");
}

#[test]
fn missing_file_is_a_data_error() {
    let status = truh_bin()
        .args([
            "test",
            "--uninfected",
            "/nonexistent/u.csv",
            "--infected",
            "/nonexistent/v.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn bad_flags_and_unknown_scenario_are_usage_errors() {
    let missing_args = truh_bin().arg("test").output().unwrap();
    assert_eq!(missing_args.status.code(), Some(1));

    let unknown = truh_bin()
        .args(["experiment", "--name", "NoSuchScenario", "--reps", "1"])
        .output()
        .unwrap();
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn constants_subcommand_emits_table() {
    let output = truh_bin()
        .args([
            "constants", "--dim", "2", "--points", "2000", "--reps", "2", "--mode", "torus",
            "--seed", "1",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("zeta1"), "stdout: {stdout}");
}

#[test]
fn closed_form_mode_prints_zeta1_only() {
    let output = truh_bin()
        .args(["constants", "--dim", "2", "--mode", "closed", "--seed", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("0.5000"), "stdout: {stdout}");
    assert!(stdout.contains("n/a"), "zeta2 should be marked unavailable: {stdout}");

    let zero = truh_bin()
        .args(["constants", "--dim", "0", "--mode", "closed"])
        .output()
        .unwrap();
    assert_eq!(zero.status.code(), Some(1));
}

#[test]
fn experiment_subcommand_reports_rates() {
    let output = truh_bin()
        .args([
            "experiment",
            "--name",
            "Table1-CaseA",
            "--reps",
            "5",
            "--seed",
            "2",
            "--methods",
            "truh",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("truh"), "stdout: {stdout}");
}
