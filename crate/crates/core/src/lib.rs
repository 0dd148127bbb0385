//! Bayesian composite risk for stochastic optimal control.

pub mod bayes;
pub mod bench;
pub mod cli;
pub mod dp;
pub mod error;
pub mod grid;
pub mod risk;
pub mod saa;
pub mod seed;
pub mod vi;

pub use error::{Error, Result};
