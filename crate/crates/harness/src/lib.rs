//! Experiment runner, file formats and command line for `lrpr-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod clock;
pub mod error;
pub mod experiment;
pub mod io;

pub use error::{HarnessError, Result};
