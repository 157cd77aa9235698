//! Throughput capacity of two-hop relay MANETs with finite relay buffers.
//!
//! The network is a cell-partitioned area with N mobile nodes, paired into
//! N unicast flows, running a two-hop relay routing algorithm whose
//! source-to-relay handshake refuses packets when the relay buffer (B
//! packets) is full. This crate provides:
//!
//! - [`analytic`]: the closed-form model — per-slot contact probabilities,
//!   the state-dependent relay-queue birth-death chain, the full-buffer
//!   fixed point, throughput capacity and local-queue delay;
//! - [`combinatorics`]: the log-space occupancy machinery under it;
//! - [`simulator`]: a slot-accurate discrete-time simulation of the same
//!   routing algorithm under i.i.d. or random-walk mobility;
//! - [`experiments`]: sweep and validation harnesses combining both, with
//!   CSV/JSON persistence.
//!
//! The analytic layer is generic over the scalar type ([`scalar::Real`]);
//! `f64` is the default and the precision all documented tolerances refer
//! to. Concrete `f64` aliases are exported at the crate root.

pub mod analytic;
pub mod combinatorics;
pub mod error;
pub mod scalar;
pub mod simulator;

pub use analytic::{
    contact_probabilities, limiting_distribution, local_queue_delay, service_rate_relay,
    solve_fixed_point, throughput_capacity, NetworkConfig,
};
pub use error::{Error, Result};
pub use scalar::Real;

/// Contact probabilities in the default precision.
pub type ContactProbabilities = analytic::ContactProbabilities<f64>;
/// Relay-queue model in the default precision.
pub type RelayQueueModel = analytic::RelayQueueModel<f64>;
/// Fixed-point solution in the default precision.
pub type FixedPointSolution = analytic::FixedPointSolution<f64>;
/// Capacity result in the default precision.
pub type CapacityResult = analytic::CapacityResult<f64>;
/// Precomputed per-config model in the default precision.
pub type NetworkModel = analytic::NetworkModel<f64>;
/// Occupancy distribution in the default precision.
pub type OccupancyDistribution = combinatorics::OccupancyDistribution<f64>;
