//! Numerical toolkit for mild solutions of dy = Ay dt + Gy dx driven by a
//! scalar eta-Holder rough path, 1/3 < eta <= 1/2, on a diagonal semigroup
//! testbed.

pub mod analysis;
pub mod config;
pub mod error;
pub mod report;
pub mod rough_path;
pub mod scale_model;
pub mod sewing;
pub mod solver;
pub mod studies;

pub use error::{Error, Result};
