//! Calibration, Monte Carlo estimators and the verification suites.

pub mod calibrate;
pub mod config;
pub mod estimator;
pub mod report;
pub mod stats;
pub mod suites;

pub use calibrate::{calibrate, CalibrationSet};
pub use config::RunConfig;
pub use report::{CaseRecord, SuiteReport};
pub use suites::{run_suite, SuiteId};
