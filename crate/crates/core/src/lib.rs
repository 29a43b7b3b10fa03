//! Exponential-family conjugate updates via likelihood linearization, and
//! their application to random-matrix extended target tracking.

pub mod demos;
pub mod diagnostics;
pub mod error;
pub mod expfam;
pub mod linalg;
pub mod linearize;
pub mod oracle;
pub mod randmat;
pub mod sim;

pub use error::{Error, Result};
