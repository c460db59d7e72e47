//! Channels, generators, superoperators and the KMS geometry.

mod channel;
mod generator;
mod kms;
mod superop;

pub use channel::{
    apply_heisenberg, apply_schrodinger, validate_channel, ChannelValidation, CpMap, DensityMatrix,
    KrausChannel, ObservationFunction,
};
pub use generator::{GeneratorValidation, GklsGenerator};
pub use kms::{kms_positive_parts, Kms};
pub use superop::{Superoperator, Vectorization};

use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by validation and spectral routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Eigenvalue floor for positive (semi)definiteness and faithfulness.
    pub psd: f64,
    /// Trace normalization of states.
    pub trace: f64,
    /// Unitality residual of Kraus families and generators.
    pub channel: f64,
    /// Algebraic simplicity of the leading eigenvalue.
    pub eig: f64,
    /// Peripheral spectrum resolution.
    pub peripheral: f64,
    /// Invariant-subspace decomposition resolution.
    pub decomposition: f64,
    /// Generic identity residual.
    pub identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd: 1e-10,
            trace: 1e-10,
            channel: 1e-9,
            eig: 1e-8,
            peripheral: 1e-8,
            decomposition: 1e-8,
            identity: 1e-12,
        }
    }
}
