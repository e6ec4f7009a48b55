//! Poisoning attacks against online centroid anomaly detection.
//!
//! The crate covers the learner side (centroid scoring, outgoing-point update
//! rules, false-positive protection), the attacker side (optimal placements,
//! the greedy nearest-out attack driven by a ball-constrained linear program
//! solver), closed-form progress bounds, a Monte Carlo harness that checks
//! the bounds against simulation, and a byte-sequence feature layer based on
//! k-gram spectrum kernels.

pub mod attack;
pub mod bounds;
pub mod error;
pub mod exec;
pub mod io;
pub mod kernel;
pub mod learner;
pub mod linalg;
pub mod model;
pub mod qclp;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{anomaly_score, relative_displacement, AttackContext, CentroidState, Point, WorkingSet};
pub use rng::RandomSource;
