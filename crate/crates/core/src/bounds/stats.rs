use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::operator::{Kms, KrausChannel, ObservationFunction};

/// Stationary outcome law and the centered observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryStats {
    /// `π(i) = tr(σ V_i* V_i)`.
    pub pi: Vec<f64>,
    pub mean: f64,
    pub centered: ObservationFunction,
    pub b: f64,
    pub c: f64,
}

/// Outcome law `tr(V_i ρ V_i*)` of a single step from `ρ`.
pub fn outcome_law(channel: &KrausChannel, rho: &CMat) -> Vec<f64> {
    channel
        .kraus
        .iter()
        .map(|v| (v * rho * v.adjoint()).trace().re.max(0.0))
        .collect()
}

/// Stats of `f` under a probability vector: mean, centered values, `b`, `c`.
pub fn centered_stats(pi: Vec<f64>, f: &ObservationFunction) -> Result<StationaryStats> {
    f.check_len(pi.len())?;
    let mean: f64 = pi.iter().zip(&f.values).map(|(p, v)| p * v).sum();
    let centered = f.shifted(mean);
    let var: f64 = pi
        .iter()
        .zip(&centered.values)
        .map(|(p, v)| p * v * v)
        .sum();
    // outcomes of stationary probability zero never occur and do not count
    let c = pi
        .iter()
        .zip(&centered.values)
        .filter(|(p, _)| **p > 0.0)
        .fold(0.0f64, |a, (_, v)| a.max(v.abs()));
    let mut b = var.max(0.0).sqrt();
    if b > c {
        // rounding only: π(f²) ≤ c² holds exactly
        b = c;
    }
    Ok(StationaryStats {
        pi,
        mean,
        centered,
        b,
        c,
    })
}

pub fn stationary_stats(
    channel: &KrausChannel,
    sigma: &CMat,
    f: &ObservationFunction,
) -> Result<StationaryStats> {
    if sigma.nrows() != channel.dim {
        return Err(Error::DimensionMismatch {
            expected: channel.dim,
            got: sigma.nrows(),
        });
    }
    let mut pi = outcome_law(channel, sigma);
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidState("stationary law has zero mass".into()));
    }
    for p in &mut pi {
        *p /= total;
    }
    centered_stats(pi, f)
}

/// `N_ρ = ‖σ^{-1/2} ρ σ^{-1/2}‖₂` in the KMS norm of `σ`.
pub fn n_rho(rho: &CMat, kms: &Kms) -> Result<f64> {
    if rho.nrows() != kms.dim() {
        return Err(Error::DimensionMismatch {
            expected: kms.dim(),
            got: rho.nrows(),
        });
    }
    Ok(kms.norm(&(&kms.inv_sqrt * rho * &kms.inv_sqrt)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::{self, real};
    use crate::operator::Tolerances;
    use approx::assert_relative_eq;

    #[test]
    fn ring_stats() {
        let s = stationary_stats(
            &fixtures::ring(),
            &(linalg::identity(3) * real(1.0 / 3.0)),
            &fixtures::ring_observation(),
        )
        .unwrap();
        for p in &s.pi {
            assert_relative_eq!(*p, 1.0 / 6.0, epsilon = 1e-14);
        }
        assert!(s.mean.abs() < 1e-14);
        assert_relative_eq!(s.b, 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.c, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn two_unitary_stats() {
        let s = stationary_stats(
            &fixtures::two_unitary_qubit(),
            &(linalg::identity(2) * real(0.5)),
            &fixtures::two_unitary_observation(),
        )
        .unwrap();
        assert_relative_eq!(s.pi[0], 0.7, epsilon = 1e-14);
        assert_relative_eq!(s.mean, 0.4, epsilon = 1e-14);
        assert_relative_eq!(s.c, 1.4, epsilon = 1e-14);
        assert_relative_eq!(s.b * s.b, 0.84, epsilon = 1e-14);
    }

    #[test]
    fn constant_is_degenerate() {
        let s = stationary_stats(
            &fixtures::ring(),
            &(linalg::identity(3) * real(1.0 / 3.0)),
            &ObservationFunction::constant(6, 2.5),
        )
        .unwrap();
        assert!(s.b.abs() < 1e-15 && s.c.abs() < 1e-15);
        assert!(s.centered.values.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn n_rho_values() {
        let tol = Tolerances::default();
        let sigma = linalg::identity(3) * real(1.0 / 3.0);
        let kms = Kms::new(&sigma, &tol).unwrap();
        assert_relative_eq!(n_rho(&sigma, &kms).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(
            n_rho(&linalg::ket_bra(3, 1, 1), &kms).unwrap(),
            3f64.sqrt(),
            epsilon = 1e-13
        );
        let s = fixtures::random_state(3, 4);
        let kms = Kms::new(&s, &tol).unwrap();
        assert_relative_eq!(n_rho(&s, &kms).unwrap(), 1.0, epsilon = 1e-12);
    }
}
