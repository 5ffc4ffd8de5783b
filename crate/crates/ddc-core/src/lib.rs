//! Data-driven LTI controller synthesis from measured trajectories, plus two
//! stealthy sensor-attack policies against the learning phase, the matching
//! anomaly detector, and rank-feasibility checks.

pub mod attack_destab;
pub mod attack_h2;
pub mod data;
pub mod detector;
pub mod error;
pub mod lti;
pub mod sdp;
pub mod synthesis;
#[cfg(feature = "testutil")]
pub mod testutil;

pub use error::{DdcError, Result};
