//! Calibrated test results and their JSON form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::TestDecision;
use crate::error::Result;

/// Null-distribution summary for one mixing-proportion draw.
///
/// `null_values` holds the full sorted vector of bootstrap statistics; it is
/// kept in memory for diagnostics but not serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerDraw {
    pub lambda: Vec<f64>,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    pub cutoff: f64,
    pub p_value: f64,
    #[serde(skip)]
    pub null_values: Vec<f64>,
}

impl PartialEq for PerDraw {
    // equality over the serialized fields; null_values are diagnostics
    fn eq(&self, other: &Self) -> bool {
        self.lambda == other.lambda
            && self.q025 == other.q025
            && self.q50 == other.q50
            && self.q975 == other.q975
            && self.cutoff == other.cutoff
            && self.p_value == other.p_value
    }
}

/// Full output of a calibrated TRUH test. The field order matches the JSON
/// schema exactly; serde_json emits shortest-round-trip decimals, so doubles
/// survive a write/read cycle bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruhResult {
    pub statistic: f64,
    pub cutoff: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub tau_fc: f64,
    pub k_hat: usize,
    pub per_draw: Vec<PerDraw>,
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl TruhResult {
    pub fn decision(&self) -> TestDecision {
        TestDecision::new(self.statistic, self.cutoff, self.p_value, self.alpha)
    }
}

pub fn save_result_json<P: AsRef<Path>>(result: &TruhResult, path: P) -> Result<()> {
    let json = serde_json::to_string_pretty(result)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_result_json<P: AsRef<Path>>(path: P) -> Result<TruhResult> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
