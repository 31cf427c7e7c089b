//! Sweep the fold-change threshold tau and watch power attenuate.
//!
//! tau > 1 demands that case nearest-neighbor distances exceed tau times the
//! baseline's own before counting as evidence, trading power for robustness
//! to mild technical variation. The sweep shares one set of bootstrap
//! replicates across all tau values, so extra thresholds are nearly free.
//!
//! ```sh
//! cargo run --release --example tau_sweep
//! ```

use truh::simlab::{run_tau_sweep, Overrides};

fn main() -> truh::Result<()> {
    let taus = [1.0, 1.2, 1.4];
    let overrides = Overrides {
        reps: Some(50),
        seed: Some(5),
        ..Overrides::default()
    };
    let reports = run_tau_sweep("Exp2-II", &overrides, &taus)?;
    println!("{:>6} {:>10}", "tau", "rate");
    for (tau, report) in taus.iter().zip(&reports) {
        println!("{tau:>6.2} {:>10.3}", report.rates["truh"]);
    }
    Ok(())
}
