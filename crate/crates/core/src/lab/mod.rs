//! Experiment drivers: N-sweeps, the Φ error measure, and feasibility
//! certification.

pub mod feasibility;
pub mod phi;
pub mod solve;
pub mod sweep;
