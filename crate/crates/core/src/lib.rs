//! Sample average approximation for stochastic programs with almost-sure
//! conic constraints, solved through a Moreau–Yosida penalty.

pub mod apps;
pub mod cli;
pub mod cones;
pub mod error;
pub mod kkt;
pub mod lab;
pub mod linalg;
pub mod penalty;
pub mod program;
pub mod prox;
pub mod regularizer;

pub use error::{Error, Result};
