//! Concentration bounds for time averages of measurement outcomes of
//! quantum Markov chains and quantum counting processes, together with the
//! exact and Monte Carlo machinery used to check them.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod classical;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod operator;
pub mod spectral;
pub mod trajectory;

pub use error::{Error, Result};
