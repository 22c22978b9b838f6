//! Qubit–qutrit self-contained quantum refrigerator.
//!
//! The crate assembles the block-diagonal Liouvillian of the refrigerator,
//! computes its biorthonormal spectrum and steady state, propagates states
//! exactly through the spectral solution and constructs initial states
//! whose slowest decay mode is suppressed (Mpemba states).

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod liouvillian;
pub mod model;
pub mod mpemba;

pub use error::{Error, Result};
pub use linalg::{Op6, C64};
pub use model::{Basis, Bath, DensityMatrix, RefrigeratorParams};
