//! Numerical laboratory for the damped wave equation on the square with
//! damping that vanishes like `(|x| - a)^beta` at the edge of an undamped strip.

pub mod cap;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod numerics;
pub mod quasimode;
pub mod resolvent;
pub mod wave;

pub use error::{Error, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
