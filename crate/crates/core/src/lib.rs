//! Physics-informed network training with auxiliary finite-difference
//! residual-gradient regularization, plus a body-fitted finite-difference
//! reference solver and an experiment harness.

pub mod annulus;
pub mod diffnet;
pub mod error;
pub mod fdref;
pub mod harness;
pub mod optim;
pub mod poisson;
pub mod sampling;
pub mod train;

pub use error::{Error, Result};
