#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Core numerics for first-order constant-coefficient operators: symbol
//! ellipticity, polynomial nullspaces, nullspace projections, voxel-grid
//! discretizations and Poincaré/Sobolev-type constants.
//!
//! The crate is `no_std` and only needs `alloc`.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod domain;
pub mod eigen;
pub mod ellipticity;
pub mod error;
pub mod grid;
pub mod inequality;
pub mod linalg;
pub mod nullspace;
pub mod operator;
pub mod polynomial;
pub mod projection;
pub mod sampling;
mod sphere;

pub use error::{Error, Result};
pub use operator::Operator;
