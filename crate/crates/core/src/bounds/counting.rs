use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::formulas::{counting_bound, BoundConstants, BoundResult};
use super::stats::n_rho;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::operator::{GklsGenerator, Kms, Tolerances};
use crate::spectral::{generator_invariant_state, spectral_gap_additive, AdditiveGap};

/// Directly computed constants of the counting bound for one jump channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingConstants {
    /// `m = tr(L* L σ)`.
    pub m: f64,
    /// `b = ‖B(1)‖₂` with `B = Re(J)`.
    pub b: f64,
    /// `α = ‖B‖₂`.
    pub alpha: f64,
}

/// Closed-form upper bounds on `b` and `α` needing only `L` and `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingAuxBounds {
    pub b_upper: f64,
    pub alpha_upper: f64,
    pub m: f64,
}

/// A GKLS generator with its invariant state and lazily computed additive
/// gap.
#[derive(Debug)]
pub struct CountingModel {
    pub generator: GklsGenerator,
    pub tol: Tolerances,
    pub sigma: CMat,
    pub kms: Kms,
    gap: OnceLock<Result<AdditiveGap>>,
}

impl CountingModel {
    pub fn new(generator: GklsGenerator, tol: Tolerances) -> Result<Self> {
        let sigma = generator_invariant_state(&generator, &tol)?.into_matrix();
        let kms = Kms::new(&sigma, &tol)?;
        Ok(CountingModel {
            generator,
            tol,
            sigma,
            kms,
            gap: OnceLock::new(),
        })
    }

    pub fn gap(&self) -> Result<&AdditiveGap> {
        self.gap
            .get_or_init(|| spectral_gap_additive(&self.generator, &self.kms, &self.tol))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.generator.jumps.len() {
            return Err(Error::InvalidArgument(format!(
                "jump index {i} out of range ({} channels)",
                self.generator.jumps.len()
            )));
        }
        Ok(())
    }

    /// Stationary intensity of channel `i`.
    pub fn intensity(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        let l = &self.generator.jumps[i];
        Ok((l.adjoint() * l * &self.sigma).trace().re)
    }

    pub fn constants(&self, i: usize) -> Result<CountingConstants> {
        self.check_index(i)?;
        let j = self.generator.jump_superoperator(i);
        let b_op = self.kms.real_part(&j);
        let one = linalg::identity(self.generator.dim);
        Ok(CountingConstants {
            m: self.intensity(i)?,
            b: self.kms.norm(&b_op.apply(&one)),
            alpha: self.kms.superop_norm(&b_op),
        })
    }

    pub fn aux_bounds(&self, i: usize) -> Result<CountingAuxBounds> {
        self.check_index(i)?;
        counting_aux_bounds(&self.generator.jumps[i], &self.kms)
    }

    pub fn bound_constants(
        &self,
        i: usize,
        rho: &CMat,
    ) -> Result<(BoundConstants, std::result::Result<(), String>)> {
        let c = self.constants(i)?;
        let mut k = BoundConstants {
            m: Some(c.m),
            b: Some(c.b),
            alpha: Some(c.alpha),
            n_rho: Some(n_rho(rho, &self.kms)?),
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

    /// Bound on `P_ρ(N_i(t)/t − m ≥ γ)`.
    pub fn bound(&self, i: usize, rho: &CMat, gamma: f64, t: f64) -> Result<BoundResult> {
        let (k, hyp) = self.bound_constants(i, rho)?;
        let mut r = counting_bound(&k, gamma, t, hyp.is_ok());
        if let (Err(why), false) = (hyp, r.valid) {
            r.reason = Some(why);
        }
        Ok(r)
    }
}

/// `b ≤ ½(‖L*L‖^{1/2} + ‖Y*Y‖^{1/2}) m^{1/2}` and
/// `α ≤ min(‖LL*‖, ‖YY*‖)/λ_min(σ)`, where `Y = σ^{1/2} L* σ^{-1/2}`.
pub fn counting_aux_bounds(l: &CMat, kms: &Kms) -> Result<CountingAuxBounds> {
    if l.nrows() != kms.dim() || l.ncols() != kms.dim() {
        return Err(Error::DimensionMismatch {
            expected: kms.dim(),
            got: l.nrows(),
        });
    }
    let y = &kms.sqrt * l.adjoint() * &kms.inv_sqrt;
    let m = (l.adjoint() * l * &kms.sigma).trace().re.max(0.0);
    let ltl = linalg::uniform_norm(&(l.adjoint() * l));
    let yty = linalg::uniform_norm(&(y.adjoint() * &y));
    let llt = linalg::uniform_norm(&(l * l.adjoint()));
    let yyt = linalg::uniform_norm(&(&y * y.adjoint()));
    Ok(CountingAuxBounds {
        b_upper: 0.5 * (ltl.sqrt() + yty.sqrt()) * m.sqrt(),
        alpha_upper: llt.min(yyt) / kms.min_eigenvalue,
        m,
    })
}
