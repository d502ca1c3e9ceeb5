//! Reliability and survivability analysis of data center network topologies.

pub mod analytic;
pub mod capacity;
pub mod classify;
pub mod cli;
pub mod error;
pub mod reachability;
pub mod reconcile;
pub mod report;
pub mod simulation;
pub mod topology;

pub use error::{Error, Result};
