//! Algorithmic core of the MD4-k preimage toolkit.
//!
//! Everything here is pure computation over in-memory data and builds under
//! `no_std` with `alloc`: the truncated MD4 reference, the gate-level CNF
//! encoder, switch-gated relaxation constraints, the unit-propagation engine
//! behind the `mu` objective, and the tabu search over switch vectors.
//! File formats, SAT solvers and the command line live in the `md4sat` crate.

#![no_std]

extern crate alloc;

pub mod cnf;
pub mod encoder;
mod error;
pub mod md4;
pub mod propagation;
pub mod relaxation;
pub mod tabu;

pub use cnf::{Lit, TemplateCnf, Var};
pub use encoder::{encode_template, substitute_hash, HashValue, VariableMap};
pub use error::Error;
pub use md4::{chaining_trace, md4_k, ChainingTrace, Digest, MessageBlock};
pub use propagation::{up_closure, MuEvaluator, MuOutcome, PropagationResult, Propagator};
pub use relaxation::{RelaxationConstraint, RelaxedTemplate, SwitchVector};
