//! Command-line front end for training and analyzing residual networks
//! on the two-spiral task.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod formats;
pub mod svg;

pub use error::{CliError, Result};
