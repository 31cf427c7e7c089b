//! Inspect the bootstrap null distribution behind a TRUH decision.
//!
//! Calibration runs one bootstrap per candidate mixing of the estimated
//! baseline subgroups (in corner mode, one per subgroup). For each draw this
//! prints the mixing weights, null-distribution quantiles, the level-alpha
//! cutoff, and the per-draw p-value; the final decision takes the most
//! conservative draw.
//!
//! ```sh
//! cargo run --release --example null_diagnostics
//! ```

use truh::simlab::{sample_mixture, Component, MixtureSpec};
use truh::{truh_test, BootstrapConfig, RngStream};

fn main() -> truh::Result<()> {
    let d = 3;
    let eye = {
        let mut c = vec![0.0; d * d];
        for i in 0..d {
            c[i * d + i] = 1.0;
        }
        c
    };
    let baseline_spec = MixtureSpec {
        d,
        components: vec![
            (0.4, Component::Gaussian { mean: vec![-3.0; d], cov: eye.clone() }),
            (0.3, Component::Gaussian { mean: vec![0.0; d], cov: eye.clone() }),
            (0.3, Component::Gaussian { mean: vec![3.0; d], cov: eye }),
        ],
    };
    let mut rng = RngStream::new(77, &[]);
    let baseline = sample_mixture(&baseline_spec, 600, &mut rng)?;
    let cases = sample_mixture(&baseline_spec, 40, &mut rng)?;

    let config = BootstrapConfig { seed: 31, ..BootstrapConfig::default() };
    let result = truh_test(&baseline, &cases, &config)?;

    println!(
        "observed statistic {:.4}; {} subgroups estimated; overall p = {:.4}\n",
        result.statistic, result.k_hat, result.p_value
    );
    println!(
        "{:<28} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "mixing weights", "q2.5%", "median", "q97.5%", "cutoff", "p"
    );
    for draw in &result.per_draw {
        let lambda = draw
            .lambda
            .iter()
            .map(|w| format!("{w:.2}"))
            .collect::<Vec<_>>()
            .join(" ");
        println!(
            "{:<28} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            lambda, draw.q025, draw.q50, draw.q975, draw.cutoff, draw.p_value
        );
    }
    Ok(())
}
