//! Concrete programs.

pub mod kantorovich;
pub mod quadratic;
pub mod regression;
pub mod semilinear;
