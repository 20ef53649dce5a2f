//! Simulation and numerical verification of the fragmentation at height of
//! stable Lévy continuous random trees.
//!
//! The engine has three layers:
//!
//! * analytic evaluators — the branching mechanism ψ, its inverse φ, the
//!   stable closed forms ([`mechanism`]), and the ODE characterizing the
//!   Laplace functional of the local time ([`odelaw`]);
//! * samplers — critical stable Galton–Watson trees approximating the tree
//!   under its excursion law ([`treesim`]), fragmentation statistics read
//!   off those trees ([`fragment`]), and the jump representation of the
//!   dislocation measure via a stable subordinator ([`dislocation`]);
//! * the verification harness — calibration of the discrete-to-continuum
//!   constants and the acceptance suites comparing tree-side Monte Carlo
//!   against closed forms and subordinator-side Monte Carlo ([`harness`]).

pub mod dislocation;
pub mod error;
pub mod fragment;
pub mod harness;
pub mod mechanism;
pub mod odelaw;
pub mod rng;
pub mod special;
pub mod treesim;

pub use error::{Error, Result};
pub use fragment::{FragmentationCurve, LevelMap, LocalTimeProfile, SmallFragStats, TaggedPath};
pub use mechanism::{BranchingMechanism, StableConstants};
pub use treesim::{OffspringLaw, PlaneTree, TreeStats};
