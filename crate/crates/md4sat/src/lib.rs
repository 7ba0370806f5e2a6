//! Command-line side of the MD4 preimage toolkit: SAT solver backends,
//! DIMACS and JSON formats, search logging, attacks and campaigns.

pub mod attack;
pub mod campaign;
pub mod config;
pub mod dimacs;
mod error;
pub mod host;
pub mod search;
pub mod solver;

pub use error::Error;
