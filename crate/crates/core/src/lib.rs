//! Simulator for networks of socially connected machines.
//!
//! - [`social`]: connection strength between two machine profiles, the link
//!   formation predicate and exponential link decay.
//! - [`network`]: discrete-time population dynamics built on top of it.
//! - [`metrics`]: connection statistics and the connection-threshold sweep.
//! - [`maze`]: cooperative maze exploration with map sharing and an archive.

pub mod error;
pub mod maze;
pub mod metrics;
pub mod network;
pub mod social;

pub use error::{Error, Result};
