//! RGB-D single-object tracking toolkit.
//!
//! Sequence I/O and synthesis ([`dataset`]), annotation derivations
//! ([`annotation`]), camera geometry ([`geometry`]), Gaussian-depth
//! bird's-eye-view cross-view fusion ([`bev`]), box-head decoding and template
//! memory ([`heads`]), training losses with gradient checks ([`losses`]), and
//! long-term box ([`eval_vot`]) and mask ([`eval_vos`]) evaluation.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotation;
pub mod bev;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval_vos;
pub mod eval_vot;
pub mod geometry;
pub mod heads;
pub mod losses;
pub mod model;
pub mod report;
pub mod tensor_io;

pub use error::{Error, Result};
