//! Exact diagonalization of interacting bosons on truncated Fock spaces, with
//! executable checkers for boson-number concentration, moment, commutator,
//! approximate-ground-state-projector and entanglement bounds.
//!
//! Basis convention: site 0 is the fastest-varying digit of the mixed-radix
//! basis index.

pub mod agsp;
pub mod bounds;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod models;
pub mod report;
pub mod spectra;

pub use error::{Error, Result};
pub use fock::{FockSpace, SparseOperator};
pub use num_complex::Complex64 as C64;
