use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{FluxFunction, MarkovChain};
use crate::error::{Error, Result};
use crate::trajectory::{rationalize, SumDistribution, ENUMERATION_LIMIT};

fn check_initial(chain: &MarkovChain, nu: &[f64]) -> Result<()> {
    if nu.len() != chain.len() {
        return Err(Error::DimensionMismatch {
            expected: chain.len(),
            got: nu.len(),
        });
    }
    if nu.iter().any(|v| !v.is_finite() || *v < 0.0) || (nu.iter().sum::<f64>() - 1.0).abs() > 1e-12
    {
        return Err(Error::InvalidArgument(
            "initial law must be a probability vector".into(),
        ));
    }
    Ok(())
}

/// Law of `Σ_{k=0}^{n−1} f(X_k, X_{k+1})` with `X_0 ~ ν`, by dynamic
/// programming over (current state, partial sum).
pub fn flux_distribution(
    chain: &MarkovChain,
    nu: &[f64],
    f: &FluxFunction,
    n: u64,
) -> Result<SumDistribution> {
    f.check(chain)?;
    check_initial(chain, nu)?;
    let (den, scores) = rationalize(&f.values)?;
    let mut cur: BTreeMap<(usize, i64), f64> = nu
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0.0)
        .map(|(x, m)| ((x, 0), *m))
        .collect();
    for _ in 0..n {
        let mut next = BTreeMap::new();
        for (&(x, s), &m) in &cur {
            for (k, &(from, to)) in f.edges.iter().enumerate() {
                if from == x {
                    *next.entry((to, s + scores[k])).or_insert(0.0) += m * chain.p[(from, to)];
                }
            }
        }
        cur = next;
    }
    let mut masses = BTreeMap::new();
    for ((_, s), m) in cur {
        *masses.entry(s).or_insert(0.0) += m;
    }
    SumDistribution::from_masses(den, n, masses)
}

/// `P_ν((1/n) Σ f(X_k, X_{k+1}) ≥ γ)`.
pub fn flux_tail_dp(
    chain: &MarkovChain,
    nu: &[f64],
    f: &FluxFunction,
    n: u64,
    gamma: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(flux_distribution(chain, nu, f, n)?.tail(gamma))
}

/// `E_ν[e^{u Σ f}] = ν P_uⁿ 1` with `(P_u)_{xy} = p_{xy} e^{u f(x, y)}`.
pub fn flux_mgf(chain: &MarkovChain, nu: &[f64], f: &FluxFunction, n: u64, u: f64) -> Result<f64> {
    f.check(chain)?;
    check_initial(chain, nu)?;
    let k = chain.len();
    let ft = f.table(k);
    let pu = DMatrix::from_fn(k, k, |x, y| chain.p[(x, y)] * (u * ft[(x, y)]).exp());
    let mut v = DVector::from_element(k, 1.0);
    for _ in 0..n {
        v = &pu * v;
    }
    let out: f64 = nu.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    if !out.is_finite() {
        return Err(Error::Numerical(format!(
            "moment generating function overflows at u = {u}"
        )));
    }
    Ok(out)
}

/// The same expectation summed over every path of length `n`.
pub fn flux_mgf_enumeration(
    chain: &MarkovChain,
    nu: &[f64],
    f: &FluxFunction,
    n: u64,
    u: f64,
) -> Result<f64> {
    f.check(chain)?;
    check_initial(chain, nu)?;
    let paths = (chain.len() as u64).checked_pow(n as u32 + 1);
    if paths.is_none_or(|c| c > ENUMERATION_LIMIT) {
        return Err(Error::Infeasible(format!(
            "{}^{} paths exceed the enumeration limit",
            chain.len(),
            n + 1
        )));
    }
    let ft = f.table(chain.len());
    fn walk(p: &DMatrix<f64>, ft: &DMatrix<f64>, x: usize, left: u64, u: f64) -> f64 {
        if left == 0 {
            return 1.0;
        }
        (0..p.ncols())
            .filter(|&y| p[(x, y)] > 0.0)
            .map(|y| p[(x, y)] * (u * ft[(x, y)]).exp() * walk(p, ft, y, left - 1, u))
            .sum()
    }
    Ok(nu
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0.0)
        .map(|(x, m)| m * walk(&chain.p, &ft, x, n, u))
        .sum())
}
