use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{adjoint, stationary_distribution, strongly_connected, FluxFunction, MarkovChain};
use crate::bounds::{
    bernstein_like, centered_stats, martingale_bound, BoundConstants, BoundResult, Flavor,
    StationaryStats,
};
use crate::error::{Error, Result};
use crate::operator::ObservationFunction;

/// Up to this many states the uniform norm of the resolvent is computed
/// exactly by vertex enumeration.
pub const EXACT_NORM_MAX_STATES: usize = 12;

/// Stats of `f` under the stationary edge law `π(x, y) = σ_x p_{xy}`.
pub fn flux_stats(chain: &MarkovChain, sigma: &[f64], f: &FluxFunction) -> Result<StationaryStats> {
    f.check(chain)?;
    let pi = f
        .edges
        .iter()
        .map(|&(x, y)| sigma[x] * chain.p[(x, y)])
        .collect();
    centered_stats(pi, &ObservationFunction::new(f.values.clone())?)
}

/// Bernstein bound for `(1/n) Σ_{k=0}^{n−1} f(X_k, X_{k+1}) − π(f)`, with `ε`
/// the gap of `Q = P†P` and `N_ν = ‖dν/dσ‖₂`.
pub fn flux_bernstein(
    chain: &MarkovChain,
    nu: &[f64],
    f: &FluxFunction,
    gamma: f64,
    n: u64,
) -> Result<BoundResult> {
    let sigma = stationary_distribution(chain)?;
    if nu.len() != chain.len() {
        return Err(Error::DimensionMismatch {
            expected: chain.len(),
            got: nu.len(),
        });
    }
    let s = flux_stats(chain, &sigma, f)?;
    let q = adjoint(chain, &sigma) * &chain.p;
    let hyp = strongly_connected(&q);
    let n_nu = nu
        .iter()
        .zip(&sigma)
        .map(|(v, s)| v * v / s)
        .sum::<f64>()
        .sqrt();
    let mut k = BoundConstants {
        mean: Some(s.mean),
        b: Some(s.b),
        c: Some(s.c),
        n_rho: Some(n_nu),
        ..Default::default()
    };
    if hyp {
        k.epsilon = Some(selfadjoint_gap(&q, &sigma));
    }
    let mut r = bernstein_like(Flavor::FluxBernstein, &k, gamma, n as f64, hyp);
    if !hyp && !r.valid {
        r.reason = Some("P†P is reducible".into());
    }
    Ok(r)
}

/// `1 − λ₂` of an `ℓ²(σ)`-selfadjoint stochastic matrix.
fn selfadjoint_gap(q: &DMatrix<f64>, sigma: &[f64]) -> f64 {
    let n = q.nrows();
    if n == 1 {
        return 1.0;
    }
    let sym = DMatrix::from_fn(n, n, |x, y| sigma[x].sqrt() * q[(x, y)] / sigma[y].sqrt());
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    (1.0 - ev[1].max(0.0)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalResolventNorm {
    /// `‖(Id − P)⁻¹|F‖∞` by vertex enumeration, for small chains.
    pub exact: Option<f64>,
    /// Norm-equivalence bound from the Euclidean operator norm.
    pub certified_upper: f64,
}

impl ClassicalResolventNorm {
    pub fn best(&self) -> f64 {
        self.exact
            .map_or(self.certified_upper, |e| e.min(self.certified_upper))
    }
}

/// `Z = (I − P + 1σ)⁻¹`, which inverts `Id − P` on `F = {h : σ(h) = 0}`.
fn fundamental_matrix(chain: &MarkovChain, sigma: &[f64]) -> Result<DMatrix<f64>> {
    let n = chain.len();
    let m = DMatrix::identity(n, n) - &chain.p + DMatrix::from_fn(n, n, |_, y| sigma[y]);
    m.try_inverse()
        .ok_or_else(|| Error::Numerical("Id − P is singular on the centered subspace".into()))
}

/// Orthonormal basis of the Euclidean complement of `v`, from a Householder
/// reflection taking `e₁` to `v/‖v‖`.
fn complement(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let mut u = DVector::from_column_slice(v);
    u /= u.norm();
    let mut w = u.clone();
    w[0] -= 1.0;
    let h = if w.norm() < 1e-14 {
        DMatrix::identity(n, n)
    } else {
        w /= w.norm();
        DMatrix::identity(n, n) - &w * w.transpose() * 2.0
    };
    h.columns(1, n - 1).into_owned()
}

pub fn resolvent_norm_classical(
    chain: &MarkovChain,
    sigma: &[f64],
) -> Result<ClassicalResolventNorm> {
    let n = chain.len();
    if n == 1 {
        return Ok(ClassicalResolventNorm {
            exact: Some(0.0),
            certified_upper: 0.0,
        });
    }
    let z = fundamental_matrix(chain, sigma)?;
    let q = complement(sigma);
    let r = q.transpose() * (DMatrix::identity(n, n) - &chain.p) * &q;
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Id − P is singular on the centered subspace".into()))?;
    let sn = (n as f64).sqrt();
    let s1 = r_inv.clone().svd(false, false).singular_values.max();
    let s2 = (r_inv - DMatrix::identity(n - 1, n - 1))
        .svd(false, false)
        .singular_values
        .max();
    let certified_upper = (sn * s1).min(1.0 + sn * s2);
    let exact = (n <= EXACT_NORM_MAX_STATES).then(|| vertex_norm(&z, sigma));
    Ok(ClassicalResolventNorm {
        exact,
        certified_upper,
    })
}

/// Maximum of `‖Zh‖∞` over the polytope `{σ(h) = 0, ‖h‖∞ ≤ 1}`, attained at
/// a vertex: all coordinates but one at `±1`.
fn vertex_norm(z: &DMatrix<f64>, sigma: &[f64]) -> f64 {
    let n = sigma.len();
    let mut best = 0.0f64;
    let mut h = DVector::zeros(n);
    for free in 0..n {
        for signs in 0u32..(1 << (n - 1)) {
            let mut bit = 0;
            let mut partial = 0.0;
            for j in 0..n {
                if j == free {
                    continue;
                }
                h[j] = if signs >> bit & 1 == 1 { 1.0 } else { -1.0 };
                partial += sigma[j] * h[j];
                bit += 1;
            }
            h[free] = -partial / sigma[free];
            if h[free].abs() > 1.0 + 1e-12 {
                continue;
            }
            best = best.max((z * &h).amax());
        }
    }
    best
}

/// Centered solution of `(Id − P) a = F` with `F(x) = Σ_y p_{xy} f(x, y)`
/// for the centered flux.
pub fn poisson_solve_classical(chain: &MarkovChain, f: &FluxFunction) -> Result<Vec<f64>> {
    let sigma = stationary_distribution(chain)?;
    let s = flux_stats(chain, &sigma, f)?;
    let n = chain.len();
    let mut rhs = DVector::zeros(n);
    for (&(x, y), v) in f.edges.iter().zip(&s.centered.values) {
        rhs[x] += chain.p[(x, y)] * v;
    }
    let a = fundamental_matrix(chain, &sigma)? * rhs;
    Ok(a.iter().copied().collect())
}

/// Hoeffding bound for fluxes, `G = (1 + ‖(Id − P)⁻¹|F‖∞) c`, valid for
/// `nγ ≥ 2G`.
pub fn flux_hoeffding(
    chain: &MarkovChain,
    f: &FluxFunction,
    gamma: f64,
    n: u64,
) -> Result<BoundResult> {
    let sigma = stationary_distribution(chain)?;
    let s = flux_stats(chain, &sigma, f)?;
    let norm = resolvent_norm_classical(chain, &sigma)?;
    let k = BoundConstants {
        mean: Some(s.mean),
        b: Some(s.b),
        c: Some(s.c),
        g: Some((1.0 + norm.best()) * s.c),
        resolvent_upper: Some(norm.certified_upper),
        resolvent_lower: norm.exact,
        ..Default::default()
    };
    Ok(martingale_bound(
        Flavor::FluxHoeffding,
        &k,
        gamma,
        n,
        2.0,
        2.0,
    ))
}
