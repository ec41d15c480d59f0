//! Recovery of a rank-`r` matrix from per-column phaseless Gaussian
//! projections by alternating minimization (AltMinLowRaP).
//!
//! The crate is `no_std` and only needs `alloc`. It covers
//!
//! * [`model`]: synthetic rank-`r` ground truths with measured incoherence,
//! * [`sensing`]: seeded Gaussian ensembles, sample splitting, bounded noise,
//! * [`metrics`]: phase-invariant distances and subspace errors,
//! * [`pr`]: inner phase retrieval solvers (RWF for real data, AltMin-TSI
//!   for complex data),
//! * [`init`]: truncated spectral initialization and rank estimation,
//! * [`altmin`]: the outer alternating loop and the noise-floor quantity.
//!
//! Everything that touches files, clocks or threads lives in the
//! `lrpr-harness` crate.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::many_single_char_names, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod altmin;
pub mod error;
pub mod init;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pr;
pub mod rng;
pub mod scalar;
pub mod sensing;

pub use error::{Error, Result};
pub use scalar::{Field, Scalar, C64};

pub use nalgebra::{DMatrix, DVector};
