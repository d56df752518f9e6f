//! Effective-Hamiltonian pipeline (boson-number truncation, block
//! interaction truncation, block energy cutoff) and the Chebyshev
//! approximate ground-state projector with its error certificate.

mod certificate;
mod chebyshev;
mod constants;
mod pipeline;

pub use certificate::*;
pub use chebyshev::*;
pub use constants::*;
pub use pipeline::*;
