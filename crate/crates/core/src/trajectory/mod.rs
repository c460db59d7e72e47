//! Sampling of output processes, exact tail probabilities by dynamic
//! programming, and Monte Carlo tail estimates.
//!
//! Randomness comes from ChaCha8 with one stream per trajectory: trajectory
//! `k` of a run seeded with `s` draws from `ChaCha8Rng::seed_from_u64(s)` with
//! its stream set to `k`. Results therefore do not depend on how trajectories
//! are distributed over threads.

mod counting;
mod discrete;
mod exact;
mod mc;
mod mixture;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::CMat;

pub use counting::{sample_counting, sample_counting_stream, NoJumpPropagator};
pub use discrete::{sample_discrete, sample_discrete_stream, windowed_sums, DiscreteSampler};
pub use exact::{
    exact_tail, exact_tail_dp, exact_tail_enumeration, exact_tail_two_sided,
    laplace_transform_exact, laplace_via_powers, rationalize, schedule_sum_distribution,
    sum_distribution, window_sum_distribution, LaplaceTransform, SumDistribution,
    ENUMERATION_LIMIT,
};
pub use mc::{
    counting_counts, mc_counting_tail, mc_probability, mc_schedule_tail, mc_tail,
    mc_tail_two_sided, mc_window_tail, wilson_interval, EmpiricalTail, WILSON_Z,
};
pub use mixture::{
    block_means, mc_reducible_tail, mixture_law_residual, reducible_tail_exact,
    sequence_probability,
};

/// Outcomes are indices into the channel's Kraus list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub outcomes: Vec<usize>,
    #[serde(skip)]
    pub conditional_states: Option<Vec<CMat>>,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingRecord {
    pub horizon: f64,
    /// `(time, jump index)`, strictly increasing in time.
    pub events: Vec<(f64, usize)>,
    pub seed: u64,
    pub stream: u64,
}

impl CountingRecord {
    pub fn count(&self, i: usize) -> usize {
        self.events.iter().filter(|e| e.1 == i).count()
    }
}

/// Generator for trajectory `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `sum ≥ n·threshold` with a relative slack absorbing rounding, shared by
/// the exact and sampled tails so both use the same event.
pub fn reaches(sum: f64, n: f64, threshold: f64) -> bool {
    let target = n * threshold;
    sum >= target - 1e-9 * target.abs().max(1.0)
}
