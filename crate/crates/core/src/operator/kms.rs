use num_complex::Complex64;

use super::{CpMap, Superoperator, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// KMS geometry of a faithful state `σ`: `⟨x, y⟩ = tr(σ^{1/2} x* σ^{1/2} y)`.
///
/// The isometry `S = (σ^{1/4})ᵀ ⊗ σ^{1/4}` maps vectorized matrices with the
/// KMS inner product onto ℂ^{d²} with the Euclidean one, so superoperator
/// norms and adjoints reduce to ordinary matrix operations on `S M S⁻¹`.
#[derive(Debug, Clone)]
pub struct Kms {
    pub sigma: CMat,
    pub sqrt: CMat,
    pub inv_sqrt: CMat,
    pub quarter: CMat,
    pub inv_quarter: CMat,
    pub min_eigenvalue: f64,
    s: CMat,
    s_inv: CMat,
}

impl Kms {
    pub fn new(sigma: &CMat, tol: &Tolerances) -> Result<Self> {
        let herm = linalg::hermiticity_residual(sigma);
        if herm > tol.psd {
            return Err(Error::NotSelfadjoint { residual: herm });
        }
        let sigma = linalg::hermitian_part(sigma);
        let min = linalg::eigvalsh(&sigma)[0];
        if min <= tol.psd {
            return Err(Error::StateNotFaithful {
                min_eigenvalue: min,
                tol: tol.psd,
            });
        }
        let sqrt = linalg::herm_fn(&sigma, f64::sqrt);
        let inv_sqrt = linalg::herm_fn(&sigma, |v| 1.0 / v.sqrt());
        let quarter = linalg::herm_fn(&sigma, |v| v.powf(0.25));
        let inv_quarter = linalg::herm_fn(&sigma, |v| v.powf(-0.25));
        let s = linalg::kron(&quarter.transpose(), &quarter);
        let s_inv = linalg::kron(&inv_quarter.transpose(), &inv_quarter);
        Ok(Kms {
            sigma,
            sqrt,
            inv_sqrt,
            quarter,
            inv_quarter,
            min_eigenvalue: min,
            s,
            s_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn inner(&self, x: &CMat, y: &CMat) -> Complex64 {
        (&self.sqrt * x.adjoint() * &self.sqrt * y).trace()
    }

    /// `‖x‖₂ = ⟨x, x⟩^{1/2}`.
    pub fn norm(&self, x: &CMat) -> f64 {
        (&self.quarter * x * &self.quarter).norm()
    }

    /// `S M S⁻¹`: the superoperator in a KMS-orthonormal frame.
    pub fn isometrized(&self, m: &Superoperator) -> CMat {
        &self.s * &m.matrix * &self.s_inv
    }

    pub fn from_isometrized(&self, dim: usize, m: &CMat) -> Superoperator {
        Superoperator::from_matrix(dim, &self.s_inv * m * &self.s)
    }

    /// Operator norm `‖η‖₂` induced by the KMS norm.
    pub fn superop_norm(&self, m: &Superoperator) -> f64 {
        linalg::uniform_norm(&self.isometrized(m))
    }

    pub fn adjoint(&self, m: &Superoperator) -> Superoperator {
        let t = self.isometrized(m).adjoint();
        self.from_isometrized(m.dim, &t)
    }

    /// `η†` for `η(x) = Σ W* x W`: Kraus operators `σ^{1/2} W* σ^{-1/2}`.
    pub fn adjoint_kraus(&self, map: &CpMap) -> CpMap {
        CpMap {
            dim: map.dim,
            kraus: map
                .kraus
                .iter()
                .map(|w| &self.sqrt * w.adjoint() * &self.inv_sqrt)
                .collect(),
        }
    }

    /// Hermitian part `(η + η†)/2` with respect to the KMS product.
    pub fn real_part(&self, m: &Superoperator) -> Superoperator {
        let t = self.isometrized(m);
        let h = linalg::hermitian_part(&t);
        self.from_isometrized(m.dim, &h)
    }

    /// Entrywise deviation of `S M S⁻¹` from Hermiticity.
    pub fn selfadjointness_residual(&self, m: &Superoperator) -> f64 {
        linalg::hermiticity_residual(&self.isometrized(m))
    }

    /// `Γ_σ^α(x) = σ^α x σ^α` for α ∈ {±1/2}.
    pub fn gamma_half(&self, x: &CMat) -> CMat {
        &self.sqrt * x * &self.sqrt
    }

    pub fn gamma_minus_half(&self, x: &CMat) -> CMat {
        &self.inv_sqrt * x * &self.inv_sqrt
    }
}

/// Splits a selfadjoint `x` into KMS-orthogonal positive parts
/// `x = x₊ − x₋` with `x± = σ^{-1/4}(σ^{1/4} x σ^{1/4})± σ^{-1/4}`.
pub fn kms_positive_parts(x: &CMat, kms: &Kms, tol: &Tolerances) -> Result<(CMat, CMat)> {
    let herm = linalg::hermiticity_residual(x);
    if herm > tol.psd {
        return Err(Error::NotSelfadjoint { residual: herm });
    }
    let y = &kms.quarter * linalg::hermitian_part(x) * &kms.quarter;
    let pos = linalg::herm_fn(&y, |v| v.max(0.0));
    let neg = linalg::herm_fn(&y, |v| (-v).max(0.0));
    Ok((
        &kms.inv_quarter * pos * &kms.inv_quarter,
        &kms.inv_quarter * neg * &kms.inv_quarter,
    ))
}
