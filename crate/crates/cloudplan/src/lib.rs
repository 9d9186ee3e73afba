//! Cost planning for IaaS resource subscriptions.
//!
//! Two-phase pipeline: [`reservation`] computes a cost-minimal long-term
//! reservation plan from a discrete demand distribution (critical-ratio
//! optimum for the best capacity/price type, then an exact covering ILP over
//! all types); [`simulator`] replays a workload trace through a Kalman-filter
//! predictor ([`predictor`]) and the per-interval short-term planner
//! ([`spa`]) with quantum-accurate billing, and compares provisioning
//! policies against oracle and pure-baseline strategies.

pub mod catalog;
pub mod cli;
mod cover;
pub mod demand;
pub mod error;
pub mod manifest;
pub mod money;
pub mod predictor;
pub mod reservation;
pub mod simulator;
pub mod spa;

pub use error::{Error, Result};
