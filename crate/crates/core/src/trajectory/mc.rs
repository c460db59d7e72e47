use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::counting::{sample_counting_stream, NoJumpPropagator};
use super::discrete::DiscreteSampler;
use super::{reaches, stream_rng};
use crate::bounds::WindowFunction;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::operator::{GklsGenerator, KrausChannel, ObservationFunction};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959964;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTail {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub trials: u64,
}

/// Wilson score interval for `hits` successes in `trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

impl EmpiricalTail {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, trials, WILSON_Z);
        let estimate = hits as f64 / trials as f64;
        EmpiricalTail {
            estimate,
            ci_low: lo.min(estimate),
            ci_high: hi.max(estimate),
            hits,
            trials,
        }
    }
}

/// Runs `event` on trajectories `0..trials`, each with its own stream, and
/// counts successes. The count does not depend on the thread pool.
pub fn mc_probability<F>(trials: u64, seed: u64, event: F) -> Result<EmpiricalTail>
where
    F: Fn(&mut ChaCha8Rng) -> Result<bool> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            event(&mut rng).map(u64::from)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(EmpiricalTail::from_counts(hits, trials))
}

/// Monte Carlo estimate of `P_ρ(f̄_n ≥ γ)`.
pub fn mc_tail(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &ObservationFunction,
    n: u64,
    gamma: f64,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalTail> {
    f.check_len(channel.len())?;
    DiscreteSampler::new(channel, rho0)?;
    mc_probability(trials, seed, |rng| {
        let mut s = DiscreteSampler::new(channel, rho0)?;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += f.values[s.step(rng)?];
        }
        Ok(reaches(sum, n as f64, gamma))
    })
}

/// Monte Carlo estimate of `P_ρ(|f̄_n − center| ≥ γ)`.
#[allow(clippy::too_many_arguments)]
pub fn mc_tail_two_sided(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &ObservationFunction,
    n: u64,
    center: f64,
    gamma: f64,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalTail> {
    f.check_len(channel.len())?;
    DiscreteSampler::new(channel, rho0)?;
    mc_probability(trials, seed, |rng| {
        let mut s = DiscreteSampler::new(channel, rho0)?;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += f.values[s.step(rng)?];
        }
        let n = n as f64;
        Ok(reaches(sum, n, center + gamma) || reaches(-sum, n, gamma - center))
    })
}

/// Monte Carlo tail of `(1/n) Σ_k f_k(X_k)` under a cyclic measurement
/// schedule.
pub fn mc_schedule_tail(
    steps: &[(KrausChannel, ObservationFunction)],
    rho0: &CMat,
    n: u64,
    gamma: f64,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalTail> {
    if steps.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    for (ch, f) in steps {
        f.check_len(ch.len())?;
    }
    mc_probability(trials, seed, |rng| {
        let mut s = DiscreteSampler::new(&steps[0].0, rho0)?;
        let mut sum = 0.0;
        for k in 0..n as usize {
            let (ch, f) = &steps[k % steps.len()];
            s.set_kraus(&ch.kraus);
            sum += f.values[s.step(rng)?];
        }
        Ok(reaches(sum, n as f64, gamma))
    })
}

/// Monte Carlo tail of the window average `(1/n) Σ_{k=1}^n f(X_k, …, X_{k+m−1})`.
pub fn mc_window_tail(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &WindowFunction,
    n: u64,
    gamma: f64,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalTail> {
    if f.outcomes != channel.len() {
        return Err(Error::DimensionMismatch {
            expected: channel.len(),
            got: f.outcomes,
        });
    }
    let len = n as usize + f.m - 1;
    mc_probability(trials, seed, |rng| {
        let mut s = DiscreteSampler::new(channel, rho0)?;
        let mut outcomes = Vec::with_capacity(len);
        for _ in 0..len {
            outcomes.push(s.step(rng)?);
        }
        let sum: f64 = outcomes.windows(f.m).map(|w| f.eval(w)).sum();
        Ok(reaches(sum, n as f64, gamma))
    })
}

/// Click counts `N_i(t)` of trajectories `0..trials`, in trajectory order.
pub fn counting_counts(
    gen: &GklsGenerator,
    i: usize,
    rho0: &CMat,
    t: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    if i >= gen.jumps.len() {
        return Err(Error::InvalidArgument(format!(
            "jump index {i} out of range"
        )));
    }
    let prop = NoJumpPropagator::new(gen);
    (0..trials)
        .into_par_iter()
        .map(|k| Ok(sample_counting_stream(gen, &prop, rho0, t, seed, k)?.count(i) as u64))
        .collect()
}

/// Monte Carlo estimate of `P_ρ(N_i(t)/t − m ≥ γ)`.
#[allow(clippy::too_many_arguments)]
pub fn mc_counting_tail(
    gen: &GklsGenerator,
    i: usize,
    rho0: &CMat,
    t: f64,
    m: f64,
    gamma: f64,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalTail> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if t == 0.0 {
        let hit = -m >= gamma;
        return Ok(EmpiricalTail::from_counts(
            if hit { trials } else { 0 },
            trials,
        ));
    }
    let counts = counting_counts(gen, i, rho0, t, trials, seed)?;
    let hits = counts
        .iter()
        .filter(|&&c| reaches(c as f64, t, m + gamma))
        .count() as u64;
    Ok(EmpiricalTail::from_counts(hits, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg;
    use crate::trajectory::exact_tail_dp;

    #[test]
    fn wilson_degenerate_cases() {
        let t = EmpiricalTail::from_counts(0, 1);
        assert_eq!(t.estimate, 0.0);
        assert!(t.ci_low == 0.0 && t.ci_high > 0.0 && t.ci_high < 1.0);
        let t = EmpiricalTail::from_counts(5, 5);
        assert!(t.ci_high == 1.0 && t.ci_low < 1.0);
        let (lo, hi) = wilson_interval(50, 100, WILSON_Z);
        assert!((lo + hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_channel_estimates_are_exact() {
        let ch = KrausChannel::unlabeled(vec![linalg::identity(2)]).unwrap();
        let f = ObservationFunction::new(vec![1.0]).unwrap();
        let rho = linalg::ket_bra(2, 0, 0);
        assert_eq!(
            mc_tail(&ch, &rho, &f, 5, 0.5, 100, 1).unwrap().estimate,
            1.0
        );
        assert_eq!(
            mc_tail(&ch, &rho, &f, 5, 1.5, 100, 1).unwrap().estimate,
            0.0
        );
        assert!(mc_tail(&ch, &rho, &f, 5, 1.5, 0, 1).is_err());
    }

    #[test]
    fn independent_of_thread_count() {
        let ch = fixtures::ring();
        let f = fixtures::ring_observation();
        let rho = linalg::ket_bra(3, 0, 0);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_tail(&ch, &rho, &f, 12, 0.3, 3000, 42).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn ring_estimate_brackets_exact_value() {
        let ch = fixtures::ring();
        let f = fixtures::ring_observation();
        let rho = linalg::ket_bra(3, 0, 0);
        let exact = exact_tail_dp(&ch, &rho, &f, 10, 0.5).unwrap();
        let est = mc_tail(&ch, &rho, &f, 10, 0.5, 20_000, 7).unwrap();
        // a 99.99% interval, so this seeded check is not flaky in spirit
        let (lo, hi) = wilson_interval(est.hits, est.trials, 3.9);
        assert!(lo <= exact && exact <= hi, "{exact} not in [{lo}, {hi}]");
    }

    #[test]
    fn zero_horizon_counting() {
        let gen = fixtures::poisson_single(1.0);
        let rho = linalg::ket_bra(2, 0, 0);
        let t = mc_counting_tail(&gen, 0, &rho, 0.0, 1.0, 0.1, 10, 0).unwrap();
        assert_eq!(t.estimate, 0.0);
        let t = mc_counting_tail(&gen, 0, &rho, 0.0, 1.0, -2.0, 10, 0).unwrap();
        assert_eq!(t.estimate, 1.0);
    }
}
