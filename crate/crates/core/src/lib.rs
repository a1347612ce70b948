#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod distributions;
pub mod error;
pub mod kernels;
pub mod numdiff;
pub mod presets;
pub mod quadrature;
pub mod slopes;
pub mod special;
pub mod spectral;
pub mod statistics;

pub use error::{Error, Result};
