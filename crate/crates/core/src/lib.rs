//! Limited-randomness tensor sketching of polynomial kernels and the
//! kernel approximations and solvers built on it.

pub mod data;
pub mod error;
pub mod kernels;
pub mod oracle;
pub mod rng;
pub mod solvers;
pub mod tensor_sketch;
pub mod transforms;

pub use data::DataMatrix;
pub use error::{Result, SketchError};
