use serde::{Deserialize, Serialize};

use super::discrete::DiscreteModel;
use super::formulas::{bernstein_like, martingale_bound, BoundConstants, BoundResult, Flavor};
use super::stats::{centered_stats, outcome_law, StationaryStats};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::operator::{KrausChannel, ObservationFunction, Superoperator};

/// One measurement step: an unravelling of the model channel and the
/// observable recorded at that step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub unravelling: KrausChannel,
    pub f: ObservationFunction,
}

/// Per-step stationary statistics of a measurement schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStats {
    pub steps: Vec<StationaryStats>,
    /// `b_n² = (1/n) Σ_k π_k((f_k − π_k(f_k))²)`.
    pub b_n: f64,
    /// `c_n = max_k ‖f_k − π_k(f_k)‖∞`.
    pub c_n: f64,
}

/// Checks that every unravelling realizes the model channel.
pub fn validate_schedule(model: &DiscreteModel, steps: &[Step]) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::InvalidArgument("empty measurement schedule".into()));
    }
    let target = Superoperator::heisenberg_kraus(&model.channel.kraus).matrix;
    for (k, s) in steps.iter().enumerate() {
        if s.unravelling.dim != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: s.unravelling.dim,
            });
        }
        s.f.check_len(s.unravelling.len())?;
        let m = Superoperator::heisenberg_kraus(&s.unravelling.kraus).matrix;
        let dev = linalg::max_abs(&(m - &target));
        if dev > model.tol.channel {
            return Err(Error::UnravellingMismatch(format!(
                "step {k} deviates from the channel by {dev:e}"
            )));
        }
    }
    Ok(())
}

/// The schedule is applied cyclically: step `k` (from 1) uses
/// `steps[(k − 1) mod len]`.
pub fn schedule_stats(model: &DiscreteModel, steps: &[Step], n: u64) -> Result<ScheduleStats> {
    validate_schedule(model, steps)?;
    let per_step: Vec<StationaryStats> = steps
        .iter()
        .map(|s| centered_stats(outcome_law(&s.unravelling, &model.sigma), &s.f))
        .collect::<Result<_>>()?;
    let n = n.max(1);
    let len = steps.len() as u64;
    let mut var_sum = 0.0;
    for (j, s) in per_step.iter().enumerate() {
        let j = j as u64;
        let uses = if j < n % len { n / len + 1 } else { n / len };
        var_sum += uses as f64 * s.b * s.b;
    }
    let used = (n.min(len)) as usize;
    let c_n = per_step[..used].iter().fold(0.0f64, |a, s| a.max(s.c));
    let b_n = (var_sum / n as f64).sqrt().min(c_n);
    Ok(ScheduleStats {
        steps: per_step,
        b_n,
        c_n,
    })
}

pub fn time_dependent_bernstein(
    model: &DiscreteModel,
    steps: &[Step],
    rho: &CMat,
    gamma: f64,
    n: u64,
) -> Result<BoundResult> {
    let s = schedule_stats(model, steps, n)?;
    let mut k = BoundConstants {
        b: Some(s.b_n),
        c: Some(s.c_n),
        n_rho: Some(model.n_rho(rho)?),
        ..Default::default()
    };
    let hyp = model.gap().map(|g| g.gap.epsilon);
    if let Ok(e) = hyp {
        k.epsilon = Some(e);
    }
    let mut r = bernstein_like(Flavor::TdmBernstein, &k, gamma, n as f64, hyp.is_ok());
    if let (Err(e), false) = (hyp, r.valid) {
        r.reason = Some(e.to_string());
    }
    Ok(r)
}

/// Bound `exp(−(nγ − G_n)²/((n−1)G_n²))` for `nγ ≥ G_n`, with
/// `G_n = (1 + Σ_{j=0}^{n−2} ‖Φʲ|F‖∞) c_n` from certified power norms.
pub fn time_dependent_hoeffding(
    model: &DiscreteModel,
    steps: &[Step],
    gamma: f64,
    n: u64,
) -> Result<BoundResult> {
    let s = schedule_stats(model, steps, n)?;
    let res = model.resolvent()?;
    let sum: f64 = if n >= 2 {
        res.power_norms((n - 2) as usize).iter().sum()
    } else {
        0.0
    };
    let k = BoundConstants {
        b: Some(s.b_n),
        c: Some(s.c_n),
        g: Some((1.0 + sum) * s.c_n),
        ..Default::default()
    };
    Ok(martingale_bound(
        Flavor::TdmHoeffding,
        &k,
        gamma,
        n,
        1.0,
        1.0,
    ))
}
