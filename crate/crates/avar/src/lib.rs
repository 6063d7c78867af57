//! File formats, reports, acceptance suites and the command line for
//! `avar-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod cli;
pub mod formats;
pub mod json;
pub mod report;
pub mod suite;
