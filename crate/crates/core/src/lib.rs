//! Wildfire power-shutoff (PSPS) and line-undergrounding optimization.
//!
//! The crate builds mixed-integer DC optimal-transmission-switching models in
//! which lines are de-energized or undergrounded to keep daily wildfire risk
//! under a threshold, optionally with vulnerability-based policy constraints
//! and a max-min-fairness equity objective, and reports load shed per
//! demographic group.
//!
//! Pipeline stages map onto modules:
//!
//! - [`grid`]: network, horizon and scenario types plus validation.
//! - [`risk`]: wildfire-potential raster to per-line per-day risk.
//! - [`demographics`]: census tract to bus assignment and vulnerability flags.
//! - [`model`]: MILP construction for every scenario in the catalog.
//! - [`solve`]: MPS emission, backends, solution verification and the
//!   exhaustive oracle.
//! - [`analysis`]: post-processing, group metrics and reports.
//! - [`pipeline`]: configuration-driven runs used by the CLI.

// `!(x >= 0.0)` is how NaN gets rejected along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod demographics;
pub mod error;
pub mod geo;
pub mod grid;
pub mod model;
pub mod pipeline;
pub mod risk;
pub mod solve;

pub use error::{Error, Result};
