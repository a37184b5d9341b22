//! Monte Carlo experiments over Wigner ensembles: configuration files, suite
//! runners, output tables and the `wignerlab` command line.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
pub mod report;
pub mod summary;
