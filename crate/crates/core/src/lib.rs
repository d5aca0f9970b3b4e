// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cholesky;
pub mod conductivity;
pub mod config;
pub mod dtn;
pub mod error;
pub mod geometry;
pub mod parallel;
pub mod pde;
pub mod pipeline;
pub mod simplex;
pub mod skernel;
pub mod solver;
pub mod sparse;
mod textio;

pub use error::{Error, Result};
