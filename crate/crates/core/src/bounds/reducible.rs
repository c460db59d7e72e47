use serde::{Deserialize, Serialize};

use super::discrete::DiscreteModel;
use super::formulas::{BoundResult, Flavor};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::operator::{ObservationFunction, Tolerances};
use crate::spectral::InvariantDecomposition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBound {
    /// `λ_j(ρ) = tr(p_j ρ)`.
    pub weight: f64,
    /// Block mean `π_j(f)`.
    pub mean: Option<f64>,
    /// Two-sided block bound, absent when the block is not visited or its
    /// analysis failed.
    pub result: Option<BoundResult>,
    /// `λ_j · min(1, two-sided bound)`, or `λ_j` when the block hypothesis
    /// fails.
    pub contribution: f64,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducibleBound {
    pub flavor: Flavor,
    pub horizon: u64,
    pub gamma: f64,
    pub blocks: Vec<BlockBound>,
    /// Bound on `P_ρ(|f̄_n − π_Γ(f)| ≥ γ)` where `Γ` is the block the
    /// trajectory settles in.
    pub mixture: f64,
}

/// Mixes per-block two-sided bounds with the weights `λ_j(ρ)`.
pub fn reducible_bound(
    decomposition: &InvariantDecomposition,
    rho: &CMat,
    f: &ObservationFunction,
    gamma: f64,
    n: u64,
    flavor: Flavor,
    tol: &Tolerances,
) -> Result<ReducibleBound> {
    if !matches!(flavor, Flavor::Bernstein | Flavor::Hoeffding) {
        return Err(Error::InvalidArgument(format!(
            "reducible bounds support bernstein and hoeffding, not {}",
            flavor.name()
        )));
    }
    let weights = decomposition.weights(rho);
    let mut blocks = Vec::with_capacity(weights.len());
    for (j, &w) in weights.iter().enumerate() {
        let Some(rho_j) = decomposition.block_initial_state(rho, j) else {
            blocks.push(BlockBound {
                weight: 0.0,
                mean: None,
                result: None,
                contribution: 0.0,
                reason: Some("block not visited from ρ".into()),
            });
            continue;
        };
        let model = DiscreteModel::new(decomposition.restricted_channels[j].clone(), *tol)?;
        let mean = model.stats(f)?.mean;
        let r = match flavor {
            Flavor::Bernstein => model.bernstein(f, &rho_j, gamma, n),
            _ => model.hoeffding(f, gamma, n),
        };
        let block = match r {
            Ok(r) => {
                let r = r.two_sided();
                let contribution = if r.valid {
                    w * r.probability_bound.min(1.0)
                } else {
                    w
                };
                BlockBound {
                    weight: w,
                    mean: Some(mean),
                    reason: r.reason.clone(),
                    result: Some(r),
                    contribution,
                }
            }
            Err(e) => BlockBound {
                weight: w,
                mean: Some(mean),
                result: None,
                contribution: w,
                reason: Some(e.to_string()),
            },
        };
        blocks.push(block);
    }
    let mixture = blocks.iter().map(|b| b.contribution).sum::<f64>().min(1.0);
    Ok(ReducibleBound {
        flavor,
        horizon: n,
        gamma,
        blocks,
        mixture,
    })
}
