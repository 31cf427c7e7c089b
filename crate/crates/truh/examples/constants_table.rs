//! Tabulate the dimension-dependent constants of the TRUH limit theory.
//!
//! For each dimension d the table shows the closed-form zeta1 (the expected
//! scaled nearest-neighbor distance for a unit-intensity Poisson process)
//! next to Monte-Carlo estimates of zeta1 and zeta2 from uniform samples on
//! the unit cube, plus delta_d, the degree variance of a typical MST vertex.
//! The cube estimates sit above the closed form because points near the
//! boundary have farther neighbors; the torus metric removes that bias.
//!
//! ```sh
//! cargo run --release --example constants_table
//! ```

use truh::constants::{estimate_constants_mc, zeta1_closed_form, ConstantsMode};
use truh::simlab::cached_delta_d;
use truh::RngStream;

fn main() -> truh::Result<()> {
    let n_points = 20_000;
    let reps = 10;
    println!(
        "{:>3} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "d", "zeta1 exact", "zeta1 cube", "zeta2 cube", "zeta1 torus", "delta_d"
    );
    for d in 1..=6 {
        let rng = RngStream::new(2024, &[d as u64]);
        let cube = estimate_constants_mc(d, n_points, reps, ConstantsMode::CubeMC, &rng)?;
        let torus = estimate_constants_mc(d, n_points, reps, ConstantsMode::TorusMC, &rng)?;
        println!(
            "{:>3} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>10.4}",
            d,
            zeta1_closed_form(d),
            cube.zeta1,
            cube.zeta2,
            torus.zeta1,
            cached_delta_d(d)
        );
    }
    Ok(())
}
