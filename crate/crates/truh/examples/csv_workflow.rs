//! End-to-end file workflow: write samples to CSV, load them back, run the
//! test, and save the result as JSON.
//!
//! This mirrors what the `truh test` CLI subcommand does, using the library
//! API directly. The JSON result round-trips bit-for-bit, so archived
//! results can be reloaded and re-evaluated at other significance levels.
//!
//! ```sh
//! cargo run --release --example csv_workflow
//! ```

use std::io::Write as _;

use truh::calibrate::decisions_at_alphas;
use truh::simlab::{sample_mixture, Component, MixtureSpec};
use truh::{load_csv, load_result_json, save_result_json, truh_test, BootstrapConfig, RngStream, SampleMatrix};

fn write_csv(path: &std::path::Path, header: &[&str], data: &SampleMatrix) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", header.join(","))?;
    for row in data.rows() {
        let line = row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        writeln!(f, "{line}")?;
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 4;
    let eye = {
        let mut c = vec![0.0; d * d];
        for i in 0..d {
            c[i * d + i] = 1.0;
        }
        c
    };
    let spec = MixtureSpec {
        d,
        components: vec![
            (0.6, Component::Gaussian { mean: vec![0.0; d], cov: eye.clone() }),
            (0.4, Component::Gaussian { mean: vec![5.0; d], cov: eye }),
        ],
    };
    let mut rng = RngStream::new(1, &[]);
    let baseline = sample_mixture(&spec, 500, &mut rng)?;
    let cases = sample_mixture(&spec, 50, &mut rng)?;

    let dir = std::env::temp_dir().join("truh_csv_workflow");
    std::fs::create_dir_all(&dir)?;
    let baseline_path = dir.join("baseline.csv");
    let cases_path = dir.join("cases.csv");
    let header = ["m1", "m2", "m3", "m4"];
    write_csv(&baseline_path, &header, &baseline)?;
    write_csv(&cases_path, &header, &cases)?;

    let baseline = load_csv(&baseline_path, true)?;
    let cases = load_csv(&cases_path, true)?;
    println!(
        "loaded {} baseline rows, {} case rows, {} columns",
        baseline.n_rows(),
        cases.n_rows(),
        baseline.dim()
    );

    let config = BootstrapConfig { seed: 99, ..BootstrapConfig::default() };
    let result = truh_test(&baseline, &cases, &config)?;
    let result_path = dir.join("result.json");
    save_result_json(&result, &result_path)?;

    let reloaded = load_result_json(&result_path)?;
    assert_eq!(result, reloaded);
    println!(
        "saved and reloaded {}: p = {:.4}, reject = {}",
        result_path.display(),
        reloaded.p_value,
        reloaded.reject
    );

    // Re-evaluate the archived result at other levels without re-running.
    for (alpha, decision) in [0.01, 0.05, 0.10, 0.20]
        .into_iter()
        .zip(decisions_at_alphas(&result, &[0.01, 0.05, 0.10, 0.20]))
    {
        println!("  alpha {alpha:>5.2}: reject = {}", decision.reject);
    }
    Ok(())
}
