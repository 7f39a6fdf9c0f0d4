//! Signature-based novelty detection on path space.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: words, truncated tensors, shuffle products and pairings.
//! * [`signature`]: paths, truncated signatures, transforms, kernels.
//! * [`statistics`]: distance-to-mean, conformance and one-class SVM scores, TAMSD.
//! * [`cvar`]: empirical VaR/CVaR and the expected-signature smooth CVaR.
//! * [`tails`]: tail bounds, thresholds, tail fits and p-values.
//! * [`multiple_testing`]: Benjamini–Hochberg, Storey, error-rate summaries.
//! * [`datasets`]: Brownian, spiked and fractional Brownian generators.
//! * [`pipeline`]: fitted detectors combining transforms, statistics and p-values.
//! * [`experiments`]: the synthetic benchmark protocols built on the above.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cvar;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod multiple_testing;
pub mod pipeline;
pub mod signature;
pub mod statistics;
pub mod tails;
pub mod tensor;

pub use error::{Error, ErrorKind, Result};
pub use signature::{PathStream, Signature, Transform};
pub use tensor::{Polynomial, SparseTensor, TruncatedTensor, Word};
