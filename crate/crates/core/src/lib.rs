//! Design and analysis toolkit for underactuated geometric compliant ring
//! modules.
//!
//! * [`data`]: bench measurements, CSV ingestion, run averaging.
//! * [`gpr`]: Gaussian-process regression with a quadratic mean basis.
//! * [`joints`]: per-family force / return-angle models and envelopes.
//! * [`archive`]: versioned JSON model files.
//! * [`mechanics`]: ring geometry, spring-chain forces, actuator sizing.

// `!(x > 0.0)` is used on purpose so that NaN fails positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod data;
pub mod gpr;
pub mod joints;
pub mod mechanics;
pub mod units;
