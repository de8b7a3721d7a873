//! Synthetic benchmarks, invariant suites and the `rmlr` command line for
//! the RMLR toolkit.

pub mod config;
pub mod data;
pub mod error;
pub mod checks;
pub mod train;
