//! Optimal dispatch of a residential electricity and heat system with a
//! battery and a seasonal heat store.
//!
//! - [`network`]: the fixed energy network, storage parameters and series.
//! - [`formulation`]: the per-window MILP, its audit and LP-file I/O.
//! - [`solver`]: a bounded-variable simplex with branch-and-bound.
//! - [`horizon`]: full-horizon and rolling-horizon simulation.
//! - [`data`]: case configuration, ingestion, synthetic data and reports.

pub mod data;
pub mod error;
pub mod formulation;
pub mod horizon;
pub mod network;
pub mod solver;
