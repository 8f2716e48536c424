//! Fixed-step transient simulation of small unbalanced three-phase power
//! systems with frequency response optimized integrators.

// Range checks are written as `!(x < limit)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod cli;
pub mod converter;
pub mod dual;
pub mod engine;
pub mod error;
pub mod integrators;
pub mod metrics;
pub mod network;
pub mod scenario;
pub mod trace;

pub use engine::{Engine, Scheme, Simulation, TimeSeries};
pub use error::{Result, SimError};
pub use scenario::Scenario;
