//! Classical Markov chains: flux bounds, the doubled chain on edges, and the
//! diagonal quantum embedding.

mod exact;
mod flux;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, real};
use crate::operator::{KrausChannel, ObservationFunction};

pub use exact::{flux_distribution, flux_mgf, flux_mgf_enumeration, flux_tail_dp};
pub use flux::{
    flux_bernstein, flux_hoeffding, flux_stats, poisson_solve_classical, resolvent_norm_classical,
    ClassicalResolventNorm, EXACT_NORM_MAX_STATES,
};

/// Tolerance on row sums and the stationarity residual.
const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// A finite Markov chain with row-stochastic transition matrix `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub states: Vec<String>,
    pub p: DMatrix<f64>,
}

impl MarkovChain {
    pub fn new(states: Vec<String>, p: DMatrix<f64>) -> Result<Self> {
        let n = states.len();
        if n == 0 || p.nrows() != n || p.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.nrows(),
            });
        }
        for (x, row) in p.row_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "row {x} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(Error::InvalidArgument(format!("row {x} sums to {s}")));
            }
        }
        Ok(MarkovChain { states, p })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let p = DMatrix::from_fn(n, n, |i, j| rows[i].get(j).copied().unwrap_or(f64::NAN));
        MarkovChain::new((0..n).map(|k| k.to_string()).collect(), p)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Positive-probability transitions `Ẽ`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for x in 0..n {
            for y in 0..n {
                if self.p[(x, y)] > 0.0 {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Strong connectivity of the positive-entry digraph.
    pub fn is_irreducible(&self) -> bool {
        strongly_connected(&self.p)
    }
}

pub(crate) fn strongly_connected(p: &DMatrix<f64>) -> bool {
    let n = p.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for y in 0..n {
                let w = if forward { p[(x, y)] } else { p[(y, x)] };
                if w > 0.0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n > 0 && reach(true) && reach(false)
}

/// Observable on the edges of a chain, aligned with [`MarkovChain::edges`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxFunction {
    pub edges: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

impl FluxFunction {
    pub fn new(chain: &MarkovChain, values: Vec<f64>) -> Result<Self> {
        let edges = chain.edges();
        if values.len() != edges.len() {
            return Err(Error::DimensionMismatch {
                expected: edges.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("flux values must be finite".into()));
        }
        Ok(FluxFunction { edges, values })
    }

    pub fn from_fn(chain: &MarkovChain, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = chain.edges().iter().map(|&(x, y)| f(x, y)).collect();
        FluxFunction::new(chain, values)
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.edges
            .iter()
            .position(|&e| e == (x, y))
            .map(|k| self.values[k])
    }

    /// Dense table with zeros off the edge set.
    pub(crate) fn table(&self, n: usize) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(n, n);
        for (&(x, y), v) in self.edges.iter().zip(&self.values) {
            t[(x, y)] = *v;
        }
        t
    }

    pub(crate) fn check(&self, chain: &MarkovChain) -> Result<()> {
        if self.edges != chain.edges() {
            return Err(Error::InvalidArgument(
                "flux function is not defined on the chain's edges".into(),
            ));
        }
        Ok(())
    }
}

/// The unique `σ` with `σP = σ`, `Σσ = 1`.
pub fn stationary_distribution(chain: &MarkovChain) -> Result<Vec<f64>> {
    if !chain.is_irreducible() {
        return Err(Error::Reducible);
    }
    let n = chain.len();
    // (Pᵀ − I)σ = 0 with the last equation replaced by normalization
    let mut a = chain.p.transpose() - DMatrix::identity(n, n);
    let mut rhs = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let sigma = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular stationarity system".into()))?;
    let residual = (chain.p.transpose() * &sigma - &sigma).amax();
    if residual > STOCHASTIC_TOLERANCE {
        return Err(Error::Numerical(format!(
            "stationarity residual {residual:e}"
        )));
    }
    Ok(sigma.iter().copied().collect())
}

/// Adjoint in `ℓ²(σ)`: `P† = D_σ⁻¹ Pᵀ D_σ`.
pub fn adjoint(chain: &MarkovChain, sigma: &[f64]) -> DMatrix<f64> {
    let n = chain.len();
    DMatrix::from_fn(n, n, |x, y| sigma[y] * chain.p[(y, x)] / sigma[x])
}

/// The chain on edges with `p̃_{(x,y),(z,w)} = δ_{yz} p_{zw}`, and its
/// invariant law `σ_x p_{xy}`.
pub fn doubled_chain(chain: &MarkovChain) -> Result<(MarkovChain, Vec<f64>)> {
    let sigma = stationary_distribution(chain)?;
    let edges = chain.edges();
    let m = edges.len();
    let p = DMatrix::from_fn(m, m, |a, b| {
        let (_, y) = edges[a];
        let (z, w) = edges[b];
        if y == z {
            chain.p[(z, w)]
        } else {
            0.0
        }
    });
    let names = edges
        .iter()
        .map(|&(x, y)| format!("{}->{}", chain.states[x], chain.states[y]))
        .collect();
    let law = edges
        .iter()
        .map(|&(x, y)| sigma[x] * chain.p[(x, y)])
        .collect();
    Ok((MarkovChain::new(names, p)?, law))
}

/// Kraus operators `√p_{xy} |y⟩⟨x|`, one per edge, and the edge observable.
pub fn embed_diagonal(
    chain: &MarkovChain,
    f: &FluxFunction,
) -> Result<(KrausChannel, ObservationFunction)> {
    f.check(chain)?;
    let n = chain.len();
    let mut kraus = Vec::with_capacity(f.edges.len());
    let mut labels = Vec::with_capacity(f.edges.len());
    for &(x, y) in &f.edges {
        kraus.push(linalg::ket_bra(n, y, x) * real(chain.p[(x, y)].sqrt()));
        labels.push(format!("{}->{}", chain.states[x], chain.states[y]));
    }
    Ok((
        KrausChannel::new(kraus, labels)?,
        ObservationFunction::new(f.values.clone())?,
    ))
}

/// Largest `|⟨h, Pg⟩_σ − ⟨P†h, g⟩_σ|` over the given pairs.
pub fn adjoint_residual(chain: &MarkovChain, sigma: &[f64], pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let pd = adjoint(chain, sigma);
    let inner = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        a.iter()
            .zip(b.iter())
            .zip(sigma)
            .map(|((x, y), s)| x * y * s)
            .sum()
    };
    pairs
        .iter()
        .map(|(h, g)| {
            let h = DVector::from_column_slice(h);
            let g = DVector::from_column_slice(g);
            (inner(&h, &(&chain.p * &g)) - inner(&(&pd * &h), &g)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::validate_channel;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn two_state() -> MarkovChain {
        MarkovChain::from_rows(&[&[0.7, 0.3], &[0.4, 0.6]]).unwrap()
    }

    pub(crate) fn ring_walk() -> MarkovChain {
        MarkovChain::from_rows(&[&[0.0, 0.5, 0.5], &[0.5, 0.0, 0.5], &[0.5, 0.5, 0.0]]).unwrap()
    }

    #[test]
    fn stationary_laws() {
        let s = stationary_distribution(&two_state()).unwrap();
        assert_relative_eq!(s[0], 4.0 / 7.0, epsilon = 1e-14);
        assert_relative_eq!(s[1], 3.0 / 7.0, epsilon = 1e-14);
        for v in stationary_distribution(&ring_walk()).unwrap() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-14);
        }
        let ds = MarkovChain::from_rows(&[&[0.1, 0.6, 0.3], &[0.5, 0.2, 0.3], &[0.4, 0.2, 0.4]])
            .unwrap();
        for v in stationary_distribution(&ds).unwrap() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-14);
        }
        let red = MarkovChain::from_rows(&[&[1.0, 0.0], &[0.5, 0.5]]).unwrap();
        assert!(matches!(
            stationary_distribution(&red),
            Err(Error::Reducible)
        ));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(MarkovChain::from_rows(&[&[0.7, 0.2], &[0.4, 0.6]]).is_err());
        assert!(MarkovChain::from_rows(&[&[1.1, -0.1], &[0.4, 0.6]]).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let ch = MarkovChain::from_rows(&[&[0.1, 0.6, 0.3], &[0.5, 0.2, 0.3], &[0.0, 0.2, 0.8]])
            .unwrap();
        let s = stationary_distribution(&ch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<_> = (0..20)
            .map(|_| {
                let h: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
                let g: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
                (h, g)
            })
            .collect();
        assert!(adjoint_residual(&ch, &s, &pairs) < 1e-12);
        let pd = adjoint(&ch, &s);
        for row in pd.row_iter() {
            assert_relative_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn doubled_chains() {
        let (d, law) = doubled_chain(&two_state()).unwrap();
        assert_eq!(d.len(), 4);
        let s = stationary_distribution(&d).unwrap();
        for (a, b) in s.iter().zip(&law) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
        let (d, law) = doubled_chain(&ring_walk()).unwrap();
        assert_eq!(d.len(), 6);
        for v in law {
            assert_relative_eq!(v, 1.0 / 6.0, epsilon = 1e-14);
        }
        let single = MarkovChain::from_rows(&[&[1.0]]).unwrap();
        assert_eq!(doubled_chain(&single).unwrap().0.len(), 1);
    }

    #[test]
    fn ring_walk_embeds_as_ring_channel() {
        let ch = ring_walk();
        let f =
            FluxFunction::from_fn(&ch, |x, y| if y == (x + 1) % 3 { 1.0 } else { -1.0 }).unwrap();
        let (k, obs) = embed_diagonal(&ch, &f).unwrap();
        assert!(validate_channel(&k, 1e-12).pass);
        let a = crate::operator::Superoperator::heisenberg_kraus(&k.kraus);
        let b = crate::operator::Superoperator::heisenberg_kraus(&crate::fixtures::ring().kraus);
        assert!(linalg::max_abs(&(a.matrix - b.matrix)) < 1e-14);
        assert_eq!(obs.values.len(), 6);
    }

    #[test]
    fn permutation_chain_is_deterministic() {
        let ch = MarkovChain::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let f = FluxFunction::from_fn(&ch, |_, _| 1.0).unwrap();
        let (k, _) = embed_diagonal(&ch, &f).unwrap();
        assert_eq!(k.len(), 2);
        let r = crate::trajectory::sample_discrete(&k, &linalg::ket_bra(2, 0, 0), 6, 1).unwrap();
        assert_eq!(r.outcomes, vec![0, 1, 0, 1, 0, 1]);
    }
}
