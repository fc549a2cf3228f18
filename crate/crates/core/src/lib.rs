//! Analysis kernel for RIS-assisted bistatic backscatter links.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that is pure
//! computation: special functions, Nakagami-m channel statistics and sampling,
//! RIS phase policies, the single-tag closed forms, and the multi-tag phase
//! optimizer. IO, Monte-Carlo orchestration and the CLI live in the `ristag`
//! crate.
//!
//! Conventions used throughout:
//!
//! * powers are linear watts, SNRs are linear ratios;
//! * a link with Nakagami shape `m` and path-loss scale `ζ` has spread
//!   `Ω = m·ζ`, so `E{α²} = Ω`;
//! * angles are wrapped into `[-π, π)`.

#![no_std]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod channel;
mod error;
pub mod multi_tag;
pub mod quad;
pub mod ris;
pub mod single_tag;
pub mod specfun;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
