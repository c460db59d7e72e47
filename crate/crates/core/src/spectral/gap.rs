use serde::{Deserialize, Serialize};

use super::irreducible::{irreducibility_of_kraus, IrreducibilityReport};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat};
use crate::operator::{GklsGenerator, Kms, KrausChannel, Superoperator, Tolerances};

/// Result of a gap computation on a KMS-selfadjoint operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub epsilon: f64,
    /// Real eigenvalues, decreasing.
    pub eigenvalues: Vec<f64>,
    /// Whether tiny negative eigenvalues were clamped to zero.
    pub clamped: bool,
}

/// Largest entry of `Φ*(σ) − σ`.
pub fn invariance_residual(channel: &KrausChannel, sigma: &CMat) -> f64 {
    linalg::max_abs(&(channel.schrodinger(sigma) - sigma))
}

/// `Ψ = Φ†Φ` with Kraus operators `K_{ij} = V_i σ^{1/2} V_j* σ^{-1/2}`,
/// labeled `"i|j"`.
pub fn multiplicative_symmetrization(
    channel: &KrausChannel,
    kms: &Kms,
    tol: &Tolerances,
) -> Result<KrausChannel> {
    let residual = invariance_residual(channel, &kms.sigma);
    if residual > tol.channel {
        return Err(Error::NotInvariant { residual });
    }
    let mut kraus = Vec::with_capacity(channel.len() * channel.len());
    let mut labels = Vec::with_capacity(kraus.capacity());
    for (vi, li) in channel.kraus.iter().zip(&channel.labels) {
        for (vj, lj) in channel.kraus.iter().zip(&channel.labels) {
            kraus.push(vi * &kms.sqrt * vj.adjoint() * &kms.inv_sqrt);
            labels.push(format!("{li}|{lj}"));
        }
    }
    KrausChannel::new(kraus, labels)
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Spectrum of a KMS-selfadjoint superoperator, read off the Hermitian part
/// of its isometrized matrix.
pub fn kms_real_spectrum(m: &Superoperator, kms: &Kms) -> Vec<f64> {
    sorted_desc(linalg::eigvalsh(&kms.isometrized(m)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicativeGap {
    pub gap: GapReport,
    pub psi_irreducibility: IrreducibilityReport,
    /// Hermiticity residual of `S Ψ S⁻¹`.
    pub selfadjointness_residual: f64,
}

/// `ε = 1 − λ₂(Ψ)`. Fails when `Ψ` is reducible.
pub fn spectral_gap_multiplicative(
    channel: &KrausChannel,
    kms: &Kms,
    tol: &Tolerances,
) -> Result<MultiplicativeGap> {
    let psi = multiplicative_symmetrization(channel, kms, tol)?;
    let irr = irreducibility_of_kraus(&psi.kraus, tol)?;
    if !irr.irreducible {
        return Err(Error::HypothesisFailed(
            "the multiplicative symmetrization is reducible".into(),
        ));
    }
    let m = Superoperator::heisenberg_kraus(&psi.kraus);
    let residual = kms.selfadjointness_residual(&m);
    let ev = kms_real_spectrum(&m, kms);
    let clamped = ev.iter().any(|&v| v < 0.0);
    let ev: Vec<f64> = ev.into_iter().map(|v| v.max(0.0)).collect();
    let second = ev.get(1).copied().unwrap_or(0.0);
    Ok(MultiplicativeGap {
        gap: GapReport {
            epsilon: (1.0 - second).clamp(0.0, 1.0),
            eigenvalues: ev,
            clamped,
        },
        psi_irreducibility: irr,
        selfadjointness_residual: residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveGap {
    pub gap: GapReport,
    /// Multiplicity of the eigenvalue 0 of `A`.
    pub zero_multiplicity: usize,
    /// `‖[H, σ]‖`, whose vanishing the literature cites as sufficient for
    /// irreducibility of `A`; reported only, never trusted.
    pub hamiltonian_commutator: f64,
}

/// Largest entry of `L*(σ)`.
pub fn generator_invariance_residual(gen: &GklsGenerator, sigma: &CMat) -> f64 {
    linalg::max_abs(&gen.gkls_apply_schrodinger(sigma))
}

/// `A = (L + L†)/2` in the Heisenberg picture.
pub fn additive_symmetrization(gen: &GklsGenerator, kms: &Kms) -> Superoperator {
    kms.real_part(&gen.superoperator())
}

/// `ε = −λ₂(A)`. Fails when the eigenvalue 0 of `A` is not simple.
pub fn spectral_gap_additive(
    gen: &GklsGenerator,
    kms: &Kms,
    tol: &Tolerances,
) -> Result<AdditiveGap> {
    let residual = generator_invariance_residual(gen, &kms.sigma);
    if residual > tol.channel {
        return Err(Error::NotInvariant { residual });
    }
    let a = additive_symmetrization(gen, kms);
    let ev = kms_real_spectrum(&a, kms);
    let scale = ev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let zero = ev.iter().filter(|v| v.abs() <= tol.eig * scale).count();
    let commutator = gen.commutes_with(&kms.sigma);
    // the kernel contains 1 and σ spans the dual kernel; both are positive
    // definite, so simplicity decides irreducibility
    if zero != 1 {
        return Err(Error::HypothesisFailed(format!(
            "the additive symmetrization is reducible (eigenvalue 0 has multiplicity {zero})"
        )));
    }
    let clamped = ev[0] > 0.0;
    let second = ev.get(1).copied().unwrap_or(0.0);
    Ok(AdditiveGap {
        gap: GapReport {
            epsilon: (-second).max(0.0),
            eigenvalues: ev.iter().map(|v| v.min(0.0)).collect(),
            clamped,
        },
        zero_multiplicity: zero,
        hamiltonian_commutator: commutator,
    })
}

/// Stationary state of a generator: kernel of `L*`.
pub fn generator_invariant_state(
    gen: &GklsGenerator,
    tol: &Tolerances,
) -> Result<crate::operator::DensityMatrix> {
    let d = gen.dim;
    let m = gen.superoperator().trace_dual();
    let k = linalg::null_space(&m.matrix, tol.eig);
    if k.ncols() > 1 {
        return Err(Error::NonUniqueFixedPoint(k.ncols()));
    }
    if k.ncols() == 0 {
        return Err(Error::NoFixedPoint);
    }
    let sigma = linalg::phase_fixed_hermitian(&linalg::unvec(&k.column(0).into_owned(), d));
    let tr = sigma.trace().re;
    let sigma = sigma / real(tr);
    crate::operator::DensityMatrix::new(sigma, tol)
}
