//! Mesoscopic freeway and arterial corridor simulation with an integrated
//! Q-learning freeway traffic controller (variable speed limits, lane-change
//! advisories and ramp metering) and a traffic-responsive arterial signal
//! controller built on a calibrated Webster-style cycle model.
//!
//! Module map:
//!
//! - [`netmodel`]: fundamental diagram, topology, demand and scenario documents.
//! - [`mesosim`]: cell-transmission freeway dynamics, ramp and approach queues, probes.
//! - [`qcore`]: sparse tabular Q-learning.
//! - [`ftc`]: the coordinated freeway control agent.
//! - [`tsc`]: cycle models, demand estimation, green splits.
//! - [`baselines`]: no control, decentralized feedback, uncoordinated sub-agents.
//! - [`eval`]: metrics, training pipelines, experiment evaluation and reports.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod ftc;
pub mod mesosim;
pub mod netmodel;
pub mod qcore;
pub mod tsc;

pub use error::{Error, Result};
