//! Checkers for the boson-number concentration, moment, trade-off,
//! commutator and combinatorial inequalities. Each returns a
//! [`CheckReport`](crate::report::CheckReport) that separates hypothesis
//! failures from bound violations.

mod algebra;
mod concentration;
mod moments;
mod multicommutator;

pub use algebra::*;
pub use concentration::*;
pub use moments::*;
pub use multicommutator::*;
