// `!(x <= y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod error;
pub mod etd;
pub mod metrics;
pub mod nonlocal;
pub mod quadrature;
pub mod raster;
pub mod segmentation;

pub use error::{Error, Result};
