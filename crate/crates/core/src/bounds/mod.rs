//! Concentration bounds evaluated from computed model constants.
//!
//! Entry points taking a model center the observable against the stationary
//! law first. Every result carries a validity flag and the constants used.

mod counting;
mod discrete;
mod formulas;
mod multitime;
mod reducible;
mod stats;
mod time_dependent;

pub use counting::{counting_aux_bounds, CountingAuxBounds, CountingConstants, CountingModel};
pub use discrete::{DiscreteModel, RESOLVENT_SEED};
pub use formulas::{
    bernstein_bound, bernstein_exponent, confidence_lower_bound, counting_bound, h_function,
    hoeffding_bound, BoundConstants, BoundResult, Flavor,
};
pub(crate) use formulas::{bernstein_like, martingale_bound};
pub use multitime::{effect_table, multitime_hoeffding, MultitimeReport, WindowFunction};
pub use reducible::{reducible_bound, BlockBound, ReducibleBound};
pub use stats::{centered_stats, n_rho, outcome_law, stationary_stats, StationaryStats};
pub use time_dependent::{
    schedule_stats, time_dependent_bernstein, time_dependent_hoeffding, validate_schedule,
    ScheduleStats, Step,
};
