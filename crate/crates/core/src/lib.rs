//! Anomaly detection by analytic isolation over distance profiles, with a
//! simulated-annealing feature explainer.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: column-typed tables, CSV ingestion, Z-scores, nominal
//!   frequency tables and synthetic generators.
//! - [`metric`]: weighted Lp and nominal distances, distance profiles and an
//!   incremental per-feature distance cache.
//! - [`isolation`]: closed-form split statistics (mgf, mean, variance) of the
//!   one-dimensional isolation process and a Monte Carlo simulator.
//! - [`detector`]: the subsample ensemble (fit / score / aggregate / AUC).
//! - [`explain`]: the tempered feature-elimination explainer, its refinement
//!   loop and distance-profile-plot summaries.
//! - [`analysis`]: the probability that a random axis-parallel tree touches a
//!   hidden feature subspace.
//! - [`bench`]: reusable experiment protocols (Cross dataset, runtime sweeps).

pub mod analysis;
pub mod bench;
pub mod dataset;
pub mod detector;
mod error;
pub mod explain;
pub mod isolation;
pub mod metric;
mod rng;

pub use error::{Error, Result};
