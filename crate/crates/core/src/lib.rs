//! Simulation and training core for coded matrix-vector multiplication on a
//! cluster of mobile workers.
//!
//! The master splits each task `A x` across workers, either as plain row
//! blocks or as rows of a random linear code `G A`, and collects partial
//! results over fading wireless links. [`simcore`] replays that protocol as a
//! discrete-event simulation, [`allocators`] holds the baseline load
//! allocation rules, and [`marl`] trains one MADDPG agent per worker to pick
//! loads.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocators;
pub mod coding;
pub mod envmodels;
pub mod error;
pub mod marl;
pub mod numerics;
pub mod scenario;
pub mod simcore;

pub use error::{Error, Result};
