//! Verifiers for the curvature estimates on concrete scenarios.

mod extremum;
mod report;
mod scenario;
mod verify;

pub use extremum::{estimate_extremum, Extremum, Mode, Region};
pub(crate) use extremum::sample_field;
pub use report::*;
pub use scenario::{Assertions, Estimate, Scenario, ScenarioAmbient, DEFAULT_TOLERANCE, MIN_BUDGET};
pub use verify::{
    horizontal_subspace, preimage_region, verify, verify_mean, verify_sectional, verify_sub_mean, verify_sub_sectional,
    INTEGRABLE_TOLERANCE, SEQUENCE_LEVELS,
};
