//! Dense linear algebra, seeded random streams, and symmetric eigen-decomposition.

mod eig;
mod matrix;
mod rng;

pub use eig::{sym_eig, SymEigen};
pub use matrix::{dot, Matrix};
pub use rng::{gaussian_sample, RngState};
