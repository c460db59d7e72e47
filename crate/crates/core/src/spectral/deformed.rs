use crate::error::Result;
use crate::linalg::real;
use crate::operator::{CpMap, Kms, KrausChannel, ObservationFunction, Superoperator};

/// `Φ_u(x) = Σ e^{u f(i)} V_i* x V_i`, with Kraus operators `e^{u f(i)/2} V_i`.
/// Not trace preserving for `u ≠ 0`.
pub fn deformed_channel(channel: &KrausChannel, f: &ObservationFunction, u: f64) -> Result<CpMap> {
    f.check_len(channel.len())?;
    let kraus = channel
        .kraus
        .iter()
        .zip(&f.values)
        .map(|(v, fi)| v * real((u * fi / 2.0).exp()))
        .collect();
    CpMap::new(kraus)
}

/// Spectral radius of `Ψ_u = Φ_u† Φ_u`, which equals `‖Φ_u‖₂²` because
/// `Ψ_u` is KMS-selfadjoint and positive.
pub fn spectral_radius_deformed(
    channel: &KrausChannel,
    f: &ObservationFunction,
    u: f64,
    kms: &Kms,
) -> Result<f64> {
    let phi_u = deformed_channel(channel, f, u)?;
    let m = Superoperator::heisenberg_kraus(&phi_u.kraus);
    let n = kms.superop_norm(&m);
    Ok(n * n)
}
