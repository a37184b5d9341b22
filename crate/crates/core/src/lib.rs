//! Numerical core for studying log-determinant fluctuations of Wigner matrices.
//!
//! The crate is `no_std` (it only needs `alloc`) so the sampling, spectral and
//! stochastic-flow kernels can be embedded anywhere. File formats, threading and
//! the command line live in the companion `wignerlab` crate.
//!
//! Module map:
//!
//! * [`ensembles`]: entry laws and Wigner matrix sampling.
//! * [`eigen`]: dense Householder tridiagonalization and implicit QL.
//! * [`spectral`]: log-determinants, Stieltjes transforms, semicircle
//!   functions, quantiles and the limiting variance functional.
//! * [`dbm`]: matrix Ornstein-Uhlenbeck transitions and coupled eigenvalue
//!   Dyson Brownian motion.
//! * [`matching`]: four-moment matching against a Gaussian convolution.
//! * [`stats`]: moments, Kolmogorov-Smirnov tests and small regression helpers.
//! * [`rng`]: keyed, order-independent random streams.
#![no_std]
// `!(x > 0.0)` style guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dbm;
pub mod eigen;
pub mod ensembles;
pub mod matching;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use num_complex::Complex64;
