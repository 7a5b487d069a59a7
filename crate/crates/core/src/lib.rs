// `!(x > 0.0)` is used on purpose so that NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bohm;
pub mod covering;
pub mod ensemble;
pub mod error;
pub mod grw;
pub mod linalg;
pub mod output;
pub mod propagator;
pub mod runner;
pub mod scenario;
pub mod topofactor;

pub use error::{Error, ErrorKind, Result};
