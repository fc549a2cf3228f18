//! Monte-Carlo oracle, scenario files, CSV output and figure presets for the
//! `ristag-core` analysis kernel.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csv;
mod error;
pub mod figures;
pub mod montecarlo;

pub use error::{Error, Result};
