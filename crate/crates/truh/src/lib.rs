//! TRUH: a nearest-neighbor two-sample test that stays calibrated when the
//! baseline sample is a mixture of heterogeneous subpopulations.
//!
//! The statistic compares, for each case observation, the distance to its
//! nearest baseline neighbor against that neighbor's own nearest-baseline
//! distance. Under the composite null — cases drawn from any re-weighting of
//! the baseline subpopulations — the two distances balance; a bootstrap over
//! estimated subpopulation mixings supplies a conservative cutoff.
//!
//! Entry points:
//! - [`calibrate::truh_test`] — the full calibrated test
//! - [`nn::truh_statistic`] — just the statistic
//! - [`baselines`] — edge-count and energy reference tests
//! - [`simlab`] — synthetic-data experiments and power studies

pub mod baselines;
pub mod calibrate;
pub mod cluster;
pub mod constants;
pub mod data;
pub mod error;
pub mod nn;
pub mod result;
pub mod rng;
pub mod simlab;

pub use calibrate::{truh_test, truh_test_taus, BootstrapConfig, MixingMode};
pub use data::{load_csv, SampleMatrix, TestDecision};
pub use error::{Result, TruhError};
pub use nn::{compute_distances, truh_statistic};
pub use result::{load_result_json, save_result_json, TruhResult};
pub use rng::RngStream;
