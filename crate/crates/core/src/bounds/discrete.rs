use std::sync::OnceLock;

use super::formulas::{
    bernstein_bound, confidence_lower_bound, hoeffding_bound, BoundConstants, BoundResult,
};
use super::stats::{n_rho, stationary_stats, StationaryStats};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::operator::{Kms, KrausChannel, ObservationFunction, Tolerances};
use crate::spectral::{
    invariant_state, is_irreducible, spectral_gap_multiplicative, IrreducibilityReport,
    MultiplicativeGap, PseudoresolventNorm, Resolvent,
};

/// Seed of the randomized lower estimate for the pseudoresolvent norm.
pub const RESOLVENT_SEED: u64 = 0x005e_ed0f_4e50;

/// A discrete-time model with its invariant state and lazily computed
/// spectral data, shared by every bound on the same channel.
#[derive(Debug)]
pub struct DiscreteModel {
    pub channel: KrausChannel,
    pub tol: Tolerances,
    pub sigma: CMat,
    pub kms: Kms,
    pub irreducibility: IrreducibilityReport,
    gap: OnceLock<Result<MultiplicativeGap>>,
    resolvent: OnceLock<Result<Resolvent>>,
    resolvent_norm: OnceLock<Result<PseudoresolventNorm>>,
}

impl DiscreteModel {
    /// Requires a unique invariant state, which must be faithful.
    pub fn new(channel: KrausChannel, tol: Tolerances) -> Result<Self> {
        let sigma = invariant_state(&channel, &tol)?.into_matrix();
        let kms = Kms::new(&sigma, &tol)?;
        let irreducibility = is_irreducible(&channel, &tol)?;
        Ok(DiscreteModel {
            channel,
            tol,
            sigma,
            kms,
            irreducibility,
            gap: OnceLock::new(),
            resolvent: OnceLock::new(),
            resolvent_norm: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.channel.dim
    }

    pub fn stats(&self, f: &ObservationFunction) -> Result<StationaryStats> {
        stationary_stats(&self.channel, &self.sigma, f)
    }

    pub fn n_rho(&self, rho: &CMat) -> Result<f64> {
        n_rho(rho, &self.kms)
    }

    /// Gap of `Ψ = Φ†Φ`; an error when `Ψ` is reducible.
    pub fn gap(&self) -> Result<&MultiplicativeGap> {
        self.gap
            .get_or_init(|| spectral_gap_multiplicative(&self.channel, &self.kms, &self.tol))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn resolvent(&self) -> Result<&Resolvent> {
        self.resolvent
            .get_or_init(|| {
                if !self.irreducibility.irreducible {
                    return Err(Error::Reducible);
                }
                Resolvent::new(&self.channel, &self.sigma)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn resolvent_norm(&self) -> Result<PseudoresolventNorm> {
        self.resolvent_norm
            .get_or_init(|| Ok(self.resolvent()?.norm(RESOLVENT_SEED)))
            .clone()
    }

    /// Constants of the Bernstein bound, with the hypothesis verdict.
    pub fn bernstein_constants(
        &self,
        f: &ObservationFunction,
        rho: &CMat,
    ) -> Result<(BoundConstants, std::result::Result<(), String>)> {
        let s = self.stats(f)?;
        let mut k = BoundConstants {
            mean: Some(s.mean),
            b: Some(s.b),
            c: Some(s.c),
            n_rho: Some(self.n_rho(rho)?),
            ..Default::default()
        };
        let hyp = match self.gap() {
            Ok(g) => {
                k.epsilon = Some(g.gap.epsilon);
                Ok(())
            }
            Err(e) => Err(e.to_string()),
        };
        Ok((k, hyp))
    }

    /// Bernstein bound on `P_ρ(f̄_n − π(f) ≥ γ)`; `f` is centered here.
    pub fn bernstein(
        &self,
        f: &ObservationFunction,
        rho: &CMat,
        gamma: f64,
        n: u64,
    ) -> Result<BoundResult> {
        let (k, hyp) = self.bernstein_constants(f, rho)?;
        let mut r = bernstein_bound(&k, gamma, n, hyp.is_ok());
        if let (Err(why), false) = (hyp, r.valid) {
            r.reason = Some(why);
        }
        Ok(r)
    }

    /// Constants of the Hoeffding bound, `G` from the certified resolvent
    /// upper bound. Fails when `Φ` is reducible.
    pub fn hoeffding_constants(&self, f: &ObservationFunction) -> Result<BoundConstants> {
        let s = self.stats(f)?;
        let norm = self.resolvent_norm()?;
        Ok(BoundConstants {
            mean: Some(s.mean),
            b: Some(s.b),
            c: Some(s.c),
            g: Some((1.0 + norm.certified_upper) * s.c),
            resolvent_upper: Some(norm.certified_upper),
            resolvent_lower: Some(norm.lower_estimate),
            ..Default::default()
        })
    }

    /// Hoeffding bound; out of regime results are flagged invalid.
    pub fn hoeffding(&self, f: &ObservationFunction, gamma: f64, n: u64) -> Result<BoundResult> {
        Ok(hoeffding_bound(&self.hoeffding_constants(f)?, gamma, n))
    }

    /// Lower bound on `P_ρ(|f̄_n − π(f)| < γ)` from both one-sided bounds.
    pub fn confidence(
        &self,
        f: &ObservationFunction,
        rho: &CMat,
        gamma: f64,
        n: u64,
    ) -> Result<f64> {
        let b = self.bernstein(f, rho, gamma, n)?;
        let h = self.hoeffding(f, gamma, n)?;
        confidence_lower_bound(n, gamma, &b, &h)
    }
}
