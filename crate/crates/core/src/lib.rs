//! Digital network twin synchronization for a multi-cell wireless network.
//!
//! The crate simulates users performing a random walk inside the coverage of a
//! handful of base stations, a cloud-side twin that mirrors user positions from
//! base-station uplinks or from a GRU predictor, and a cooperative multi-agent
//! Q-learning stack (VDN, with an IQL baseline) that decides per slot which users
//! each base station serves and whether it spends a resource block to
//! synchronize the twin. Resource blocks are assigned per base station with an
//! exact Hungarian matching.
//!
//! Module map:
//! - [`nncore`]: dense matrices, GRU cell forward/backward, SGD.
//! - [`mobility`]: random-walk users and trajectory datasets.
//! - [`radio`]: channel gains, interference, rates, uplink delay, allocations.
//! - [`twin`]: observation, twin composition, sync error, team reward.
//! - [`predictor`]: GRU next-state predictor training and inference.
//! - [`allocator`]: Hungarian matching and the sequential per-BS allocation loop.
//! - [`marl`]: action encoding, Q-networks, replay, VDN and IQL updates.
//! - [`harness`]: episodes, training runs, evaluation, sweeps, audit, I/O.

pub mod allocator;
pub mod error;
pub mod harness;
pub mod marl;
pub mod mobility;
pub mod nncore;
pub mod par;
pub mod predictor;
pub mod radio;
pub mod rng;
pub mod twin;

pub use error::{Error, Result};
