//! Busy-cycle age/excess mean value of the M/G/∞ queue: exact values,
//! distribution-class bounds, and a Monte Carlo oracle.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod bounds;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod numeric;
pub mod quadrature;
pub mod simulator;
pub mod tables;
