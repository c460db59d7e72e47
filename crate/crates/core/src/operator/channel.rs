use serde::{Deserialize, Serialize};

use super::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat, ZERO};

/// A completely positive map `x ↦ Σ W_j* x W_j` given by an unlabeled Kraus
/// family. Trace preservation is not required, so deformed maps fit here.
#[derive(Debug, Clone, PartialEq)]
pub struct CpMap {
    pub dim: usize,
    pub kraus: Vec<CMat>,
}

impl CpMap {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let dim = kraus
            .first()
            .map(|k| k.nrows())
            .ok_or_else(|| Error::InvalidChannel("empty Kraus family".into()))?;
        for k in &kraus {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: k.nrows().max(k.ncols()),
                });
            }
        }
        Ok(CpMap { dim, kraus })
    }

    pub fn heisenberg(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for v in &self.kraus {
            out += v.adjoint() * x * v;
        }
        out
    }

    pub fn schrodinger(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for v in &self.kraus {
            out += v * rho * v.adjoint();
        }
        out
    }

    /// `Σ W_j* W_j`, the image of the identity.
    pub fn kraus_sum(&self) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for v in &self.kraus {
            out += v.adjoint() * v;
        }
        out
    }
}

/// A quantum channel with an ordered, labeled Kraus family. Outcome `i`
/// occurs with probability `tr(V_i ρ V_i*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    pub dim: usize,
    pub kraus: Vec<CMat>,
    pub labels: Vec<String>,
}

impl KrausChannel {
    /// Builds a channel, checking shapes and label uniqueness. Unitality is
    /// checked separately by [`validate_channel`].
    pub fn new(kraus: Vec<CMat>, labels: Vec<String>) -> Result<Self> {
        let map = CpMap::new(kraus)?;
        if labels.len() != map.kraus.len() {
            return Err(Error::InvalidChannel(format!(
                "{} labels for {} Kraus operators",
                labels.len(),
                map.kraus.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidChannel(format!("duplicate label {l:?}")));
            }
        }
        for k in &map.kraus {
            if !linalg::is_finite(k) {
                return Err(Error::InvalidChannel("non-finite Kraus entry".into()));
            }
        }
        Ok(KrausChannel {
            dim: map.dim,
            kraus: map.kraus,
            labels,
        })
    }

    /// Labels `"0"`, `"1"`, … in order.
    pub fn unlabeled(kraus: Vec<CMat>) -> Result<Self> {
        let labels = (0..kraus.len()).map(|k| k.to_string()).collect();
        Self::new(kraus, labels)
    }

    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn as_cp_map(&self) -> CpMap {
        CpMap {
            dim: self.dim,
            kraus: self.kraus.clone(),
        }
    }

    pub fn heisenberg(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for v in &self.kraus {
            out += v.adjoint() * x * v;
        }
        out
    }

    pub fn schrodinger(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for v in &self.kraus {
            out += v * rho * v.adjoint();
        }
        out
    }

    /// Indices of Kraus operators that vanish identically.
    pub fn zero_operators(&self) -> Vec<usize> {
        self.kraus
            .iter()
            .enumerate()
            .filter(|(_, k)| linalg::max_abs(k) == 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelValidation {
    /// Largest entrywise modulus of `Σ V_i* V_i − 1`.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Indices of identically zero Kraus operators (allowed, flagged).
    pub zero_operators: Vec<usize>,
}

pub fn validate_channel(channel: &KrausChannel, tol: f64) -> ChannelValidation {
    let residual = channel.as_cp_map().kraus_sum() - linalg::identity(channel.dim);
    let max_deviation = linalg::max_abs(&residual);
    ChannelValidation {
        max_deviation,
        tolerance: tol,
        pass: max_deviation <= tol,
        zero_operators: channel.zero_operators(),
    }
}

fn check_dim(channel: &KrausChannel, m: &CMat) -> Result<()> {
    if m.nrows() != channel.dim || m.ncols() != channel.dim {
        return Err(Error::DimensionMismatch {
            expected: channel.dim,
            got: m.nrows().max(m.ncols()),
        });
    }
    Ok(())
}

/// `Φ(x) = Σ V_i* x V_i`.
pub fn apply_heisenberg(channel: &KrausChannel, x: &CMat) -> Result<CMat> {
    check_dim(channel, x)?;
    Ok(channel.heisenberg(x))
}

/// `Φ*(ρ) = Σ V_i ρ V_i*`.
pub fn apply_schrodinger(channel: &KrausChannel, rho: &CMat) -> Result<CMat> {
    check_dim(channel, rho)?;
    Ok(channel.schrodinger(rho))
}

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMat,
}

impl DensityMatrix {
    pub fn new(matrix: CMat, tol: &Tolerances) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let herm = linalg::hermiticity_residual(&matrix);
        if herm > tol.psd {
            return Err(Error::NotSelfadjoint { residual: herm });
        }
        let min = linalg::eigvalsh(&matrix)[0];
        if min < -tol.psd {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        let tr = matrix.trace();
        if (tr - real(1.0)).norm() > tol.trace {
            return Err(Error::InvalidState(format!(
                "trace {} differs from 1",
                tr.re
            )));
        }
        Ok(DensityMatrix {
            matrix: linalg::hermitian_part(&matrix),
        })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            matrix: linalg::identity(d) * real(1.0 / d as f64),
        }
    }

    pub fn pure(d: usize, k: usize) -> Self {
        DensityMatrix {
            matrix: linalg::ket_bra(d, k, k),
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::eigvalsh(&self.matrix)[0]
    }

    pub fn is_faithful(&self, tol: f64) -> bool {
        self.min_eigenvalue() > tol
    }
}

/// Real values of the observable `f` on the outcome set, in label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFunction {
    pub values: Vec<f64>,
}

impl ObservationFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "observation values must be finite".into(),
            ));
        }
        Ok(ObservationFunction { values })
    }

    pub fn constant(len: usize, a: f64) -> Self {
        ObservationFunction {
            values: vec![a; len],
        }
    }

    pub fn check_len(&self, outcomes: usize) -> Result<()> {
        if self.values.len() != outcomes {
            return Err(Error::DimensionMismatch {
                expected: outcomes,
                got: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn shifted(&self, by: f64) -> Self {
        ObservationFunction {
            values: self.values.iter().map(|v| v - by).collect(),
        }
    }

    /// `F = Σ f(i) V_i* V_i`.
    pub fn weighted_kraus_sum(&self, channel: &KrausChannel) -> CMat {
        let mut out = CMat::from_element(channel.dim, channel.dim, ZERO);
        for (v, f) in channel.kraus.iter().zip(&self.values) {
            out += v.adjoint() * v * real(*f);
        }
        out
    }
}
