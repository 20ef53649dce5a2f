//! The verification suites. Each suite reproduces one acceptance block:
//! its cases carry estimate, stderr, target and the effective tolerance.

mod exp_sigma;
mod frag_property;
mod mechanism_suite;
mod ngg;
mod ngh;
mod ode_analytic;
mod ode_mc;
mod poisson_counts;
mod small_fragments;
mod structural;
mod tails;

use crate::error::{Error, Result};
use crate::harness::calibrate::CalibrationSet;
use crate::harness::config::RunConfig;
use crate::harness::report::SuiteReport;
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SuiteId {
    Mechanism,
    OdeAnalytic,
    ExpSigma,
    Ngh,
    Ngg,
    PoissonCounts,
    SmallFragments,
    OdeMc,
    FragProperty,
    Structural,
    Tails,
}

impl SuiteId {
    pub const ALL: [SuiteId; 11] = [
        SuiteId::Mechanism,
        SuiteId::OdeAnalytic,
        SuiteId::ExpSigma,
        SuiteId::Ngh,
        SuiteId::Ngg,
        SuiteId::PoissonCounts,
        SuiteId::SmallFragments,
        SuiteId::OdeMc,
        SuiteId::FragProperty,
        SuiteId::Structural,
        SuiteId::Tails,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteId::Mechanism => "mechanism",
            SuiteId::OdeAnalytic => "ode-analytic",
            SuiteId::ExpSigma => "exp-sigma",
            SuiteId::Ngh => "ngh",
            SuiteId::Ngg => "ngg",
            SuiteId::PoissonCounts => "poisson-counts",
            SuiteId::SmallFragments => "small-fragments",
            SuiteId::OdeMc => "ode-mc",
            SuiteId::FragProperty => "frag-property",
            SuiteId::Structural => "structural",
            SuiteId::Tails => "tails",
        }
    }

    /// Whether the suite needs tree-side calibration at all.
    pub fn needs_calibration(&self) -> bool {
        !matches!(
            self,
            SuiteId::Mechanism | SuiteId::OdeAnalytic | SuiteId::Structural | SuiteId::Tails
        )
    }
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SuiteId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SuiteId::ALL
            .iter()
            .find(|id| id.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let valid: Vec<&str> = SuiteId::ALL.iter().map(|i| i.as_str()).collect();
                Error::Config(format!(
                    "unknown suite '{s}'; valid ids: {}",
                    valid.join(", ")
                ))
            })
    }
}

/// Execute one suite. Tree-side suites require a calibration set.
pub fn run_suite(
    id: SuiteId,
    cfg: &RunConfig,
    calib: Option<&CalibrationSet>,
) -> Result<SuiteReport> {
    if id.needs_calibration() && calib.is_none() {
        return Err(Error::Config(format!(
            "suite '{id}' requires a calibration set"
        )));
    }
    let start = Instant::now();
    let cases = match id {
        SuiteId::Mechanism => mechanism_suite::run(cfg)?,
        SuiteId::OdeAnalytic => ode_analytic::run(cfg)?,
        SuiteId::ExpSigma => exp_sigma::run(cfg, calib.unwrap())?,
        SuiteId::Ngh => ngh::run(cfg, calib.unwrap())?,
        SuiteId::Ngg => ngg::run(cfg, calib.unwrap())?,
        SuiteId::PoissonCounts => poisson_counts::run(cfg, calib.unwrap())?,
        SuiteId::SmallFragments => small_fragments::run(cfg, calib.unwrap())?,
        SuiteId::OdeMc => ode_mc::run(cfg, calib.unwrap())?,
        SuiteId::FragProperty => frag_property::run(cfg, calib.unwrap())?,
        SuiteId::Structural => structural::run(cfg)?,
        SuiteId::Tails => tails::run(cfg)?,
    };
    Ok(SuiteReport::from_cases(
        id.as_str(),
        cases,
        start.elapsed().as_millis(),
        cfg.seed,
    ))
}
