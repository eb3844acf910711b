//! Numerical verification, construction and search of 3-dimensional Ricci solitons that fibre
//! semi-conformally over surfaces.

// Tensor code indexes several arrays per loop; `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod catalog;
pub mod cjet;
pub mod error;
pub mod expr;
pub mod field;
pub mod fitter;
pub mod jet;
pub mod minimal_fibres;
pub mod report;
pub mod semiconformal;
pub mod soliton_check;
pub mod tensor_lab;
pub mod warped;

pub use error::{Error, Result};
