//! Output laws of reducible channels as mixtures over invariant blocks.

use rand::Rng;

use super::discrete::DiscreteSampler;
use super::exact::exact_tail_two_sided;
use super::mc::{mc_probability, EmpiricalTail};
use super::reaches;
use crate::bounds::outcome_law;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::operator::{KrausChannel, ObservationFunction};
use crate::spectral::InvariantDecomposition;

/// `tr(V_{i_n}⋯V_{i_1} ρ V_{i_1}*⋯V_{i_n}*)`.
pub fn sequence_probability(channel: &KrausChannel, rho: &CMat, outcomes: &[usize]) -> f64 {
    let mut t = rho.clone();
    for &i in outcomes {
        let v = &channel.kraus[i];
        t = v * t * v.adjoint();
    }
    t.trace().re
}

/// Largest deviation between `P_ρ` and `Σ_j λ_j(ρ) P_{ρ_j}` over all outcome
/// sequences of length `len`.
pub fn mixture_law_residual(
    channel: &KrausChannel,
    decomposition: &InvariantDecomposition,
    rho: &CMat,
    len: usize,
) -> f64 {
    let k = channel.len();
    let weights = decomposition.weights(rho);
    let blocks: Vec<Option<CMat>> = (0..decomposition.len())
        .map(|j| decomposition.block_initial_state(rho, j))
        .collect();
    let total = k.pow(len as u32);
    let mut seq = vec![0usize; len];
    let mut worst = 0.0f64;
    for idx in 0..total {
        let mut r = idx;
        for s in seq.iter_mut().rev() {
            *s = r % k;
            r /= k;
        }
        let full = sequence_probability(channel, rho, &seq);
        let mix: f64 = blocks
            .iter()
            .enumerate()
            .filter_map(|(j, b)| {
                let ch = &decomposition.restricted_channels[j];
                b.as_ref()
                    .map(|b| weights[j] * sequence_probability(ch, b, &seq))
            })
            .sum();
        worst = worst.max((full - mix).abs());
    }
    worst
}

/// Block means `π_j(f)` under each block's invariant state.
pub fn block_means(
    decomposition: &InvariantDecomposition,
    f: &ObservationFunction,
) -> Result<Vec<f64>> {
    decomposition
        .restricted_channels
        .iter()
        .zip(&decomposition.block_states)
        .map(|(ch, s)| {
            f.check_len(ch.len())?;
            Ok(outcome_law(ch, s)
                .iter()
                .zip(&f.values)
                .map(|(p, v)| p * v)
                .sum())
        })
        .collect()
}

/// `P_ρ(|f̄_n − π_Γ(f)| ≥ γ) = Σ_j λ_j P_{ρ_j}(|f̄_n − π_j(f)| ≥ γ)`, each
/// block by dynamic programming.
pub fn reducible_tail_exact(
    decomposition: &InvariantDecomposition,
    rho: &CMat,
    f: &ObservationFunction,
    n: u64,
    gamma: f64,
) -> Result<f64> {
    let means = block_means(decomposition, f)?;
    let weights = decomposition.weights(rho);
    let mut total = 0.0;
    for j in 0..decomposition.len() {
        if let Some(rho_j) = decomposition.block_initial_state(rho, j) {
            let ch = &decomposition.restricted_channels[j];
            total += weights[j] * exact_tail_two_sided(ch, &rho_j, f, n, means[j], gamma)?;
        }
    }
    Ok(total.min(1.0))
}

/// Monte Carlo version: draw the block `Γ` with probabilities `λ_j(ρ)`, then
/// run the block channel from `ρ_Γ`.
#[allow(clippy::too_many_arguments)]
pub fn mc_reducible_tail(
    decomposition: &InvariantDecomposition,
    rho: &CMat,
    f: &ObservationFunction,
    n: u64,
    gamma: f64,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalTail> {
    let means = block_means(decomposition, f)?;
    let weights = decomposition.weights(rho);
    let states: Vec<Option<CMat>> = (0..decomposition.len())
        .map(|j| decomposition.block_initial_state(rho, j))
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument(
            "initial state has no weight on any block".into(),
        ));
    }
    mc_probability(trials, seed, |rng| {
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut j = weights.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc && states[k].is_some() {
                j = k;
                break;
            }
        }
        while states[j].is_none() {
            j -= 1;
        }
        let ch = &decomposition.restricted_channels[j];
        let mut s = DiscreteSampler::new(ch, states[j].as_ref().unwrap())?;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += f.values[s.step(rng)?];
        }
        let n = n as f64;
        Ok(reaches(sum, n, means[j] + gamma) || reaches(-sum, n, gamma - means[j]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::{self, real};
    use crate::operator::Tolerances;
    use crate::spectral::decompose_invariant_subspaces;

    #[test]
    fn two_block_mixture_identity() {
        let ch = fixtures::two_block_ring(0.5, 0.8);
        let dec = decompose_invariant_subspaces(&ch, &Tolerances::default()).unwrap();
        assert_eq!(dec.len(), 2);
        let rho = linalg::identity(6) * real(1.0 / 6.0);
        assert!(mixture_law_residual(&ch, &dec, &rho, 3) < 1e-12);
    }

    #[test]
    fn mc_brackets_exact_mixture_tail() {
        let ch = fixtures::two_block_ring(0.5, 0.8);
        let dec = decompose_invariant_subspaces(&ch, &Tolerances::default()).unwrap();
        let f = fixtures::ring_observation();
        let rho = linalg::identity(6) * real(1.0 / 6.0);
        let exact = reducible_tail_exact(&dec, &rho, &f, 10, 0.3).unwrap();
        let est = mc_reducible_tail(&dec, &rho, &f, 10, 0.3, 20_000, 3).unwrap();
        let (lo, hi) = super::super::wilson_interval(est.hits, est.trials, 3.9);
        assert!(lo <= exact && exact <= hi, "{exact} not in [{lo}, {hi}]");
    }
}
