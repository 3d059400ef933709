//! Sparse multipath channel estimation from multi-band CSI magnitudes.
//!
//! A WiFi receiver that splices CSI across many bands sees per-band phase
//! distortions (packet-detection delay ramps and PLL offsets) that make naive
//! splicing useless, while the sample magnitudes stay intact. This crate
//! estimates the channel impulse response from those magnitudes alone:
//!
//! 1. [`preproc`] denoises each band with an l1 fit over an oversampled delay
//!    dictionary and fills in the unobserved zero subcarrier,
//! 2. [`autocorr`] recovers the CIR autocorrelation from squared magnitudes
//!    via basis pursuit denoising plus k-means support refinement,
//! 3. [`cir`] rebuilds delays and complex gains from the autocorrelation (up
//!    to a global shift, reflection, and phase),
//! 4. [`disambig`] resolves shift and reflection with a reciprocal
//!    zero-subcarrier exchange between the two link ends.
//!
//! [`chronos`] implements a single-subcarrier splicing baseline and
//! [`harness`] runs seeded Monte-Carlo ranging comparisons between the two.

pub mod autocorr;
pub mod chronos;
pub mod cir;
pub mod config;
pub mod disambig;
pub mod error;
pub mod harness;
pub mod kmeans;
pub mod linalg;
pub mod preproc;
pub mod signal;
pub mod solver;
pub mod spline;

pub use error::{Error, Result};
