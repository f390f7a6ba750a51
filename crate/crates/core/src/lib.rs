//! Numerical laboratory for the low-Mach-number limit of compressible nematic
//! liquid-crystal flow.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acoustic;
pub mod compressible;
pub mod config;
pub mod director;
pub mod error;
pub mod field;
pub mod fieldio;
pub mod harness;
pub mod incompressible;
pub mod init;
pub mod model;
pub mod ops;
pub mod output;
pub mod poisson;
pub mod spectral;
pub mod trajectory;
pub mod transform;

pub use error::{Error, Result};
