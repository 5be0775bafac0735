//! Numerical engine for regularized characters of group actions on
//! compactified model varieties.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cutoff;
pub mod error;
pub mod fixed_point;
pub mod group;
pub mod quad;
pub mod symbol;
pub mod trace;
pub mod transform;
pub mod variety;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
