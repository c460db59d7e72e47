use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::irreducible::{invariant_state, is_irreducible};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat};
use crate::operator::{KrausChannel, Superoperator, Tolerances};

/// Orthogonal decomposition of the system into minimal invariant blocks.
#[derive(Debug, Clone)]
pub struct InvariantDecomposition {
    /// Orthogonal projections `p_j`, summing to the identity.
    pub projections: Vec<CMat>,
    /// Orthonormal bases (as columns) of the block ranges.
    pub bases: Vec<CMat>,
    /// Channels `B_j* V_i B_j` acting on each block.
    pub restricted_channels: Vec<KrausChannel>,
    /// Block invariant states, in block coordinates.
    pub block_states: Vec<CMat>,
    /// `max_{i,j} ‖[V_i, p_j]‖`.
    pub commutation_residual: f64,
}

impl InvariantDecomposition {
    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    /// `λ_j(ρ) = tr(p_j ρ)`.
    pub fn weights(&self, rho: &CMat) -> Vec<f64> {
        self.projections
            .iter()
            .map(|p| (p * rho).trace().re.max(0.0))
            .collect()
    }

    /// `ρ_j = p_j ρ p_j / λ_j` in block coordinates, or `None` when `λ_j = 0`.
    pub fn block_initial_state(&self, rho: &CMat, j: usize) -> Option<CMat> {
        let b = &self.bases[j];
        let r = b.adjoint() * rho * b;
        let w = r.trace().re;
        (w > 1e-15).then(|| r / real(w))
    }

    /// Block invariant state embedded back into the full space.
    pub fn embedded_state(&self, j: usize) -> CMat {
        &self.bases[j] * &self.block_states[j] * self.bases[j].adjoint()
    }
}

/// Projection onto the eigenvalue-1 eigenspace of a channel's trace dual,
/// built from the right and left kernels (the eigenvalue is semisimple).
fn fixed_projection_of_maximally_mixed(channel: &KrausChannel, tol: &Tolerances) -> Result<CMat> {
    let d = channel.dim;
    let m = Superoperator::schrodinger_kraus(&channel.kraus).matrix - linalg::identity(d * d);
    let v = linalg::null_space(&m, tol.eig);
    let w = linalg::null_space(&m.adjoint(), tol.eig);
    if v.ncols() == 0 || v.ncols() != w.ncols() {
        return Err(Error::Numerical(
            "fixed space of the dual channel is ill-conditioned".into(),
        ));
    }
    let gram = w.adjoint() * &v;
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Numerical("eigenvalue 1 is not semisimple".into()))?;
    let x = linalg::vec_of(&(linalg::identity(d) * real(1.0 / d as f64)));
    let p = &v * gram_inv * w.adjoint() * x;
    let state = linalg::hermitian_part(&linalg::unvec(&p, d));
    let tr = state.trace().re;
    Ok(state / real(tr))
}

/// Groups the eigenvectors of a Hermitian matrix by eigenvalue, splitting
/// where consecutive eigenvalues differ by more than `resolution`.
fn spectral_blocks(h: &CMat, resolution: f64) -> Vec<CMat> {
    let (values, vectors) = linalg::eigh(h);
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > resolution {
            blocks.push(vectors.columns(start, k - start).into_owned());
            start = k;
        }
    }
    blocks
}

fn restrict(channel: &KrausChannel, basis: &CMat) -> Result<KrausChannel> {
    let kraus = channel
        .kraus
        .iter()
        .map(|v| basis.adjoint() * v * basis)
        .collect();
    KrausChannel::new(kraus, channel.labels.clone())
}

fn decompose_block(
    channel: &KrausChannel,
    basis: CMat,
    tol: &Tolerances,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<CMat>,
) -> Result<()> {
    let restricted = restrict(channel, &basis)?;
    let db = restricted.dim;
    if db == 1 || is_irreducible(&restricted, tol)?.irreducible {
        out.push(basis);
        return Ok(());
    }
    let m = Superoperator::heisenberg_kraus(&restricted.kraus).matrix - linalg::identity(db * db);
    let fixed = linalg::null_space(&m, tol.eig);
    // random Hermitian element of the fixed-point algebra
    let mut h = linalg::zeros(db);
    for k in 0..fixed.ncols() {
        let x = linalg::unvec(&fixed.column(k).into_owned(), db);
        let c: f64 = StandardNormal.sample(rng);
        h += linalg::hermitian_part(&x) * real(c);
    }
    let scale = linalg::uniform_norm(&h).max(1e-300);
    let blocks = spectral_blocks(&(h / real(scale)), tol.decomposition.max(1e-6));
    if blocks.len() < 2 {
        return Err(Error::Numerical(
            "reducible block without a splitting fixed point".into(),
        ));
    }
    for b in blocks {
        decompose_block(channel, &basis * b, tol, rng, out)?;
    }
    Ok(())
}

/// Splits a channel with a faithful invariant state into minimal invariant
/// blocks, using spectral projections of random Hermitian fixed points.
pub fn decompose_invariant_subspaces(
    channel: &KrausChannel,
    tol: &Tolerances,
) -> Result<InvariantDecomposition> {
    let d = channel.dim;
    let state = fixed_projection_of_maximally_mixed(channel, tol)?;
    if linalg::eigvalsh(&state)[0] <= tol.psd {
        return Err(Error::PositiveRecurrenceFails);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec0);
    let mut bases = Vec::new();
    decompose_block(channel, linalg::identity(d), tol, &mut rng, &mut bases)?;
    let projections: Vec<CMat> = bases.iter().map(|b| b * b.adjoint()).collect();
    let mut commutation_residual = 0.0f64;
    for p in &projections {
        for v in &channel.kraus {
            commutation_residual =
                commutation_residual.max(linalg::max_abs(&linalg::commutator(v, p)));
        }
    }
    if commutation_residual > tol.decomposition {
        return Err(Error::Numerical(format!(
            "block projections do not commute with the Kraus operators ({commutation_residual:e})"
        )));
    }
    let mut restricted_channels = Vec::with_capacity(bases.len());
    let mut block_states = Vec::with_capacity(bases.len());
    for b in &bases {
        let r = restrict(channel, b)?;
        block_states.push(invariant_state(&r, tol)?.into_matrix());
        restricted_channels.push(r);
    }
    Ok(InvariantDecomposition {
        projections,
        bases,
        restricted_channels,
        block_states,
        commutation_residual,
    })
}
