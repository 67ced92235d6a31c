pub mod detconc;
pub mod eigen;
pub mod ensembles;
pub mod exact;
pub mod gap;
pub mod laws;
pub mod matrix;
pub mod rng;
pub mod scalar;
pub mod smallball;
pub mod stats;
pub mod structure;

pub use matrix::Matrix;
pub use scalar::{Rational, Scalar};
