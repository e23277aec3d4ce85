//! Trotterized simulation of Lindblad dynamics with certified commutator
//! error bounds and step-size Richardson extrapolation.

pub mod error;
pub mod linalg;
pub mod model;
pub mod propagate;
pub mod richardson;
pub mod bounds;
pub mod bchverify;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
