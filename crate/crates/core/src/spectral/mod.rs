//! Invariant states, irreducibility, spectral gaps, the Poisson equation and
//! invariant-subspace decompositions.

mod decompose;
mod deformed;
mod gap;
mod irreducible;
mod resolvent;

pub use decompose::{decompose_invariant_subspaces, InvariantDecomposition};
pub use deformed::{deformed_channel, spectral_radius_deformed};
pub use gap::{
    additive_symmetrization, generator_invariance_residual, generator_invariant_state,
    invariance_residual, kms_real_spectrum, multiplicative_symmetrization, spectral_gap_additive,
    spectral_gap_multiplicative, AdditiveGap, GapReport, MultiplicativeGap,
};
pub use irreducible::{
    invariant_state, irreducibility_of_kraus, is_irreducible, is_primitive, spectral_report,
    IrreducibilityReport, SpectralReport,
};
pub use resolvent::{
    phi_power_norms, poisson_solve, poisson_solve_with, pseudoresolvent_norm, PseudoresolventNorm,
    Resolvent,
};
