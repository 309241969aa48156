//! Lattice path-integral simulator for relational quantum dynamics.
//!
//! The crate builds relational amplitude matrices for a system coupled to
//! measuring systems, derives coordinate-representation reduced density
//! kernels from them, evolves densities through interaction histories,
//! evaluates influence functionals, and measures entanglement entropy by
//! eigendecomposition and by the replica-trace route. Everything is exposed
//! through the deterministic `qrel` CLI.

pub mod error;
pub mod lattice;
mod linalg;
pub mod propagator;
pub mod relational;

pub use error::{Error, Result};
