//! Robust PCA point estimation with conformal uncertainty quantification.
//!
//! The crate recovers a low-rank matrix from partially observed, sparsely
//! corrupted data and wraps the point estimate with distribution-free
//! per-entry confidence intervals calibrated by weighted split (or full)
//! conformal prediction. A deterministic simulation generator reproduces
//! the standard coverage/length benchmark settings.
//!
//! The crate is `no_std`-compatible (requires `alloc`); float math falls
//! back to `libm` when the `std` feature is disabled. All operations are
//! pure functions of their inputs: a fixed seed yields bit-identical
//! results, independent of threading on the caller's side.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std as _std;

pub mod conformal;
pub mod error;
pub mod index_set;
pub mod matrix;
pub mod metrics;
pub mod obsmodel;
pub mod ops;
pub mod rng;
pub mod simgen;
pub mod solver;
pub mod svd;

pub use error::{Error, Result};
pub use index_set::IndexSet;
pub use matrix::{DenseMatrix, FactorPair};
pub use rng::{CounterRng, StreamKey};
