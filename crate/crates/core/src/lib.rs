//! Verifier-in-the-loop solver orchestration for max-min downlink power
//! control in cell-free massive MIMO.
//!
//! A portfolio of power-control solvers ([`solvers`]) proposes allocations,
//! an independent [`verifier`] recomputes the achieved common rate from the
//! channel, and routers ([`router`]) decide which solver to try first. The
//! [`orchestrator`] runs the fallback chain until a candidate is accepted;
//! [`bench`] generates seeded benchmarks and aggregates results.

pub mod bench;
pub mod cli;
pub mod error;
pub mod exec;
pub mod model;
pub mod orchestrator;
pub mod router;
pub mod solvers;
pub mod verifier;

pub use error::{Error, Result};
