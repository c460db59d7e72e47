use serde::{Deserialize, Serialize};

use super::{Superoperator, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{self, cplx, real, CMat};

/// Continuous-time generator `L(x) = G* x + x G + Σ L_i* x L_i` with
/// `G = iH − ½ Σ L_i* L_i`, equivalently
/// `L(x) + i[H, x] = Σ L_i* x L_i − ½{L_i* L_i, x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GklsGenerator {
    pub dim: usize,
    pub hamiltonian: CMat,
    pub jumps: Vec<CMat>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorValidation {
    pub hamiltonian_residual: f64,
    /// Largest entry of `L(1)`.
    pub identity_residual: f64,
    pub pass: bool,
}

impl GklsGenerator {
    pub fn new(hamiltonian: CMat, jumps: Vec<CMat>, labels: Vec<String>) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if hamiltonian.ncols() != dim || dim == 0 {
            return Err(Error::InvalidGenerator("Hamiltonian is not square".into()));
        }
        for l in &jumps {
            if l.nrows() != dim || l.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: l.nrows().max(l.ncols()),
                });
            }
        }
        if labels.len() != jumps.len() {
            return Err(Error::InvalidGenerator(format!(
                "{} labels for {} jump operators",
                labels.len(),
                jumps.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        if !labels.iter().all(|l| seen.insert(l.as_str())) {
            return Err(Error::InvalidGenerator("duplicate jump labels".into()));
        }
        if !linalg::is_finite(&hamiltonian) || !jumps.iter().all(linalg::is_finite) {
            return Err(Error::InvalidGenerator("non-finite entry".into()));
        }
        Ok(GklsGenerator {
            dim,
            hamiltonian,
            jumps,
            labels,
        })
    }

    pub fn unlabeled(hamiltonian: CMat, jumps: Vec<CMat>) -> Result<Self> {
        let labels = (0..jumps.len()).map(|k| k.to_string()).collect();
        Self::new(hamiltonian, jumps, labels)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn validate(&self, tol: &Tolerances) -> GeneratorValidation {
        let hamiltonian_residual = linalg::hermiticity_residual(&self.hamiltonian);
        let identity_residual = linalg::max_abs(&self.gkls_apply(&linalg::identity(self.dim)));
        GeneratorValidation {
            hamiltonian_residual,
            identity_residual,
            pass: hamiltonian_residual <= tol.psd && identity_residual <= tol.channel,
        }
    }

    /// `Σ L_i* L_i`.
    pub fn jump_rate_operator(&self) -> CMat {
        let mut k = CMat::zeros(self.dim, self.dim);
        for l in &self.jumps {
            k += l.adjoint() * l;
        }
        k
    }

    /// `G = iH − ½ Σ L_i* L_i`.
    pub fn g(&self) -> CMat {
        &self.hamiltonian * cplx(0.0, 1.0) - self.jump_rate_operator() * real(0.5)
    }

    /// Heisenberg-picture action `L(x)`.
    pub fn gkls_apply(&self, x: &CMat) -> CMat {
        let g = self.g();
        let mut out = g.adjoint() * x + x * &g;
        for l in &self.jumps {
            out += l.adjoint() * x * l;
        }
        out
    }

    /// Schrödinger-picture action `L*(ρ) = Gρ + ρG* + Σ L_i ρ L_i*`.
    pub fn gkls_apply_schrodinger(&self, rho: &CMat) -> CMat {
        let g = self.g();
        let mut out = &g * rho + rho * g.adjoint();
        for l in &self.jumps {
            out += l * rho * l.adjoint();
        }
        out
    }

    /// `J_i(x) = L_i* x L_i`.
    pub fn jump_map(&self, i: usize, x: &CMat) -> Result<CMat> {
        let l = self
            .jumps
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("no jump operator {i}")))?;
        Ok(l.adjoint() * x * l)
    }

    /// `e^{tL₀}(x) = e^{tG*} x e^{tG}`. The exponential is nalgebra's Padé
    /// scaling-and-squaring, accurate to well below 1e-10 at desk scale.
    pub fn no_jump_semigroup(&self, t: f64, x: &CMat) -> Result<CMat> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        let e = (self.g() * real(t)).exp();
        Ok(e.adjoint() * x * e)
    }

    /// `e^{tL₀*}(ρ) = e^{tG} ρ e^{tG*}`.
    pub fn no_jump_schrodinger(&self, t: f64, rho: &CMat) -> Result<CMat> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        let e = (self.g() * real(t)).exp();
        Ok(&e * rho * e.adjoint())
    }

    /// Matrix of `L` in the Heisenberg picture.
    pub fn superoperator(&self) -> Superoperator {
        let d = self.dim;
        let one = linalg::identity(d);
        let g = self.g();
        let mut m = linalg::kron(&one, &g.adjoint()) + linalg::kron(&g.transpose(), &one);
        for l in &self.jumps {
            m += linalg::kron(&l.transpose(), &l.adjoint());
        }
        Superoperator::from_matrix(d, m)
    }

    /// Matrix of `J_i` in the Heisenberg picture.
    pub fn jump_superoperator(&self, i: usize) -> Superoperator {
        Superoperator::heisenberg_kraus(std::slice::from_ref(&self.jumps[i]))
    }

    /// `[H, σ]`, used for the sufficient irreducibility condition.
    pub fn commutes_with(&self, sigma: &CMat) -> f64 {
        linalg::max_abs(&linalg::commutator(&self.hamiltonian, sigma))
    }
}
