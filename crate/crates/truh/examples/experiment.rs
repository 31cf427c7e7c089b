//! Run one of the built-in simulation scenarios and print rejection rates.
//!
//! Scenarios come in pairs: the "-I" variants draw cases from a re-weighting
//! of the baseline mixture (the composite null; rates should stay near or
//! below alpha), while the "-II" variants change the case distribution
//! (rates measure power). Pass a scenario name to try others:
//! Exp1-I, Exp1-II, Exp1-Fig3, Exp2-I, Exp2-II, Exp3-I, Exp3-II,
//! Table1-CaseA, Table1-CaseB.
//!
//! ```sh
//! cargo run --release --example experiment [-- SCENARIO]
//! ```

use truh::simlab::{run_experiment, Method, Overrides};

fn main() -> truh::Result<()> {
    let scenario = std::env::args().nth(1).unwrap_or_else(|| "Exp2-II".into());
    // Trimmed replicate count keeps this quick; drop the override for the
    // scenario's full default.
    let overrides = Overrides {
        reps: Some(50),
        methods: Some(vec![Method::Truh, Method::EdgecountAsymptotic, Method::Energy]),
        seed: Some(11),
        ..Overrides::default()
    };
    let report = run_experiment(&scenario, &overrides)?;
    print!("{}", report.text_table());
    println!("\nas json:\n{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}
