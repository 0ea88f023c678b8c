//! Semantic-aware uplink power allocation for multi-UAV area coverage.
//!
//! The crate simulates UAVs flying fixed circular trajectories, each observing
//! a square patch of ground and uploading it over a shared multi-channel
//! uplink. Image quality on the server depends on the per-area data rate, and
//! overlapping observations only count once (best member wins). On top of the
//! simulator sit:
//!
//! * a multi-agent double/dueling deep Q-learner with value-decomposition
//!   (summed) joint values, trained on the semantic coverage reward ([`marl`]),
//! * a bit-oriented variant of the same learner, a greedy highest-gain
//!   heuristic and an exhaustive per-slot oracle ([`baselines`]),
//! * experiment plumbing for seeded sweeps and CSV output ([`harness`]) and an
//!   executable acceptance report ([`validation`]).
//!
//! Everything is deterministic given the master seed.

pub mod approximator;
pub mod baselines;
pub mod env;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod marl;
pub mod policy;
pub mod radio;
pub mod rng;
pub mod semantics;
pub mod validation;

pub use error::{Error, Result};
