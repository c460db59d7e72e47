//! Closed-form bound evaluators. Everything here is arithmetic on already
//! computed constants; model analysis lives in the sibling modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    Bernstein,
    Hoeffding,
    Counting,
    FluxBernstein,
    FluxHoeffding,
    TdmBernstein,
    TdmHoeffding,
    Multitime,
    Reducible,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::Bernstein => "bernstein",
            Flavor::Hoeffding => "hoeffding",
            Flavor::Counting => "counting",
            Flavor::FluxBernstein => "flux-bernstein",
            Flavor::FluxHoeffding => "flux-hoeffding",
            Flavor::TdmBernstein => "tdm-bernstein",
            Flavor::TdmHoeffding => "tdm-hoeffding",
            Flavor::Multitime => "multitime",
            Flavor::Reducible => "reducible",
        }
    }
}

/// Constants entering the bounds. Fields not used by a flavor are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Stationary mean `π(f)` removed by auto-centering.
    pub mean: Option<f64>,
    /// Stationary standard deviation of the centered observable.
    pub b: Option<f64>,
    /// Sup norm of the centered observable.
    pub c: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_rho: Option<f64>,
    pub g: Option<f64>,
    /// Certified upper bound on the pseudoresolvent norm used in `g`.
    pub resolvent_upper: Option<f64>,
    /// Heuristic lower estimate of the same norm (reporting only).
    pub resolvent_lower: Option<f64>,
    pub m: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub flavor: Flavor,
    /// `n` for discrete time, `t` for continuous time.
    pub horizon: f64,
    pub gamma: f64,
    /// `min(1, prefactor · e^{exponent})`.
    pub probability_bound: f64,
    pub exponent: f64,
    pub prefactor: f64,
    pub valid: bool,
    pub two_sided: bool,
    pub constants: BoundConstants,
    pub reason: Option<String>,
}

impl BoundResult {
    fn new(flavor: Flavor, horizon: f64, gamma: f64, constants: BoundConstants) -> Self {
        BoundResult {
            flavor,
            horizon,
            gamma,
            probability_bound: 1.0,
            exponent: 0.0,
            prefactor: 1.0,
            valid: false,
            two_sided: false,
            constants,
            reason: None,
        }
    }

    fn evaluated(mut self, prefactor: f64, exponent: f64) -> Self {
        self.prefactor = prefactor;
        self.exponent = exponent;
        self.valid = true;
        self.probability_bound = clip(prefactor * exponent.exp());
        if self.probability_bound >= 1.0 && self.reason.is_none() {
            self.reason = Some("clipped at 1".into());
        }
        self
    }

    fn degenerate_zero(mut self, why: &str) -> Self {
        self.valid = true;
        self.exponent = f64::NEG_INFINITY;
        self.probability_bound = 0.0;
        self.reason = Some(why.into());
        self
    }

    fn invalid(mut self, why: impl Into<String>) -> Self {
        self.valid = false;
        self.probability_bound = 1.0;
        self.exponent = 0.0;
        self.reason = Some(why.into());
        self
    }

    /// Union bound over both deviation directions: doubles the prefactor.
    pub fn two_sided(mut self) -> Self {
        if self.two_sided {
            return self;
        }
        self.two_sided = true;
        self.prefactor *= 2.0;
        if self.valid {
            self.probability_bound = clip(self.prefactor * self.exponent.exp());
        }
        self
    }

    pub fn with_sides(self, two_sided: bool) -> Self {
        if two_sided {
            self.two_sided()
        } else {
            self
        }
    }
}

fn clip(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

/// `h(x) = (√(1+x) + x/2 + 1)⁻¹`.
pub fn h_function(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "h is defined for x ≥ 0, got {x}"
        )));
    }
    Ok(1.0 / ((1.0 + x).sqrt() + x / 2.0 + 1.0))
}

fn h(x: f64) -> f64 {
    1.0 / ((1.0 + x).sqrt() + x / 2.0 + 1.0)
}

/// Bernstein-type exponent `−n γ² ε/(6b²) h(10cγ/(3b²))`.
pub fn bernstein_exponent(b: f64, c: f64, epsilon: f64, gamma: f64, n: f64) -> f64 {
    let b2 = b * b;
    -n * gamma * gamma * epsilon / (6.0 * b2) * h(10.0 * c * gamma / (3.0 * b2))
}

#[allow(clippy::result_large_err)]
fn check_gamma(r: BoundResult) -> std::result::Result<BoundResult, BoundResult> {
    if !(r.gamma > 0.0) || !r.gamma.is_finite() {
        let why = format!("γ must be positive and finite, got {}", r.gamma);
        return Err(r.invalid(why));
    }
    if !(r.horizon >= 0.0) || !r.horizon.is_finite() {
        let why = format!("horizon must be nonnegative, got {}", r.horizon);
        return Err(r.invalid(why));
    }
    Ok(r)
}

fn need(v: Option<f64>, name: &str) -> std::result::Result<f64, String> {
    match v {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(format!("{name} is not finite ({x})")),
        None => Err(format!("{name} unavailable")),
    }
}

/// Bernstein-type bound from `b, c, ε, N_ρ`. `hypothesis` is the caller's
/// verdict on irreducibility of the multiplicative symmetrization (or its
/// classical analogue).
pub fn bernstein_bound(k: &BoundConstants, gamma: f64, n: u64, hypothesis: bool) -> BoundResult {
    bernstein_like(Flavor::Bernstein, k, gamma, n as f64, hypothesis)
}

pub(crate) fn bernstein_like(
    flavor: Flavor,
    k: &BoundConstants,
    gamma: f64,
    n: f64,
    hypothesis: bool,
) -> BoundResult {
    let r = match check_gamma(BoundResult::new(flavor, n, gamma, k.clone())) {
        Ok(r) => r,
        Err(r) => return r,
    };
    let vals = (|| Ok::<_, String>((need(k.b, "b")?, need(k.c, "c")?, need(k.n_rho, "N_ρ")?)))();
    let (b, c, n_rho) = match vals {
        Ok(v) => v,
        Err(why) => return r.invalid(why),
    };
    if b <= 0.0 || c <= 0.0 {
        return r.degenerate_zero("deterministic average: the centered observable vanishes");
    }
    if !hypothesis {
        return r.invalid("spectral-gap hypothesis fails");
    }
    let epsilon = match need(k.epsilon, "ε") {
        Ok(e) => e,
        Err(why) => return r.invalid(why),
    };
    if !(epsilon > 0.0) {
        return r.invalid(format!("nonpositive gap ε = {epsilon}"));
    }
    let exponent = bernstein_exponent(b, c, epsilon, gamma, n);
    r.evaluated(n_rho, exponent)
}

/// Hoeffding-type bound `exp(−(nγ − 2G)²/(2(n−1)G²))` for `nγ ≥ 2G`.
pub fn hoeffding_bound(k: &BoundConstants, gamma: f64, n: u64) -> BoundResult {
    martingale_bound(Flavor::Hoeffding, k, gamma, n, 2.0, 2.0)
}

/// Shared evaluator for `exp(−(nγ − sG)²/(q(n−1)G²))` valid for `nγ ≥ sG`.
pub(crate) fn martingale_bound(
    flavor: Flavor,
    k: &BoundConstants,
    gamma: f64,
    n: u64,
    shift: f64,
    denominator: f64,
) -> BoundResult {
    let r = match check_gamma(BoundResult::new(flavor, n as f64, gamma, k.clone())) {
        Ok(r) => r,
        Err(r) => return r,
    };
    if n == 0 {
        return r.invalid("n must be at least 1");
    }
    let c = match need(k.c, "c") {
        Ok(c) => c,
        Err(why) => return r.invalid(why),
    };
    if c <= 0.0 {
        return r.degenerate_zero("deterministic average: the centered observable vanishes");
    }
    let g = match need(k.g, "G") {
        Ok(g) => g,
        Err(why) => return r.invalid(why),
    };
    if !(g > 0.0) {
        return r.invalid(format!("nonpositive G = {g}"));
    }
    let nf = n as f64;
    let excess = nf * gamma - shift * g;
    if excess < 0.0 {
        return r.invalid("outside regime");
    }
    if n == 1 {
        if gamma > c {
            // a single centered value never exceeds c
            return r.degenerate_zero("single step: γ exceeds ‖f‖∞");
        }
        return r.evaluated(1.0, 0.0);
    }
    let exponent = -excess * excess / (denominator * (nf - 1.0) * g * g);
    r.evaluated(1.0, exponent)
}

/// Counting bound `N_ρ exp(−t γ²/(2(m + 2b²/ε + max(5α/ε, 5/2)γ)))`.
pub fn counting_bound(k: &BoundConstants, gamma: f64, t: f64, hypothesis: bool) -> BoundResult {
    let r = match check_gamma(BoundResult::new(Flavor::Counting, t, gamma, k.clone())) {
        Ok(r) => r,
        Err(r) => return r,
    };
    let vals = (|| {
        Ok::<_, String>((
            need(k.m, "m")?,
            need(k.b, "b")?,
            need(k.alpha, "α")?,
            need(k.n_rho, "N_ρ")?,
        ))
    })();
    let (m, b, alpha, n_rho) = match vals {
        Ok(v) => v,
        Err(why) => return r.invalid(why),
    };
    if !hypothesis {
        return r.invalid("the additive symmetrization is reducible");
    }
    let epsilon = match need(k.epsilon, "ε") {
        Ok(e) => e,
        Err(why) => return r.invalid(why),
    };
    if !(epsilon > 0.0) {
        return r.invalid(format!("nonpositive gap ε = {epsilon}"));
    }
    if m < 0.0 {
        return r.invalid(format!("negative intensity m = {m}"));
    }
    let denom = 2.0 * (m + 2.0 * b * b / epsilon + (5.0 * alpha / epsilon).max(2.5) * gamma);
    r.evaluated(n_rho, -t * gamma * gamma / denom)
}

/// `1 − 2 min(p_Bernstein, p_Hoeffding)`, clipped to `[0, 1]`.
pub fn confidence_lower_bound(
    n: u64,
    gamma: f64,
    bernstein: &BoundResult,
    hoeffding: &BoundResult,
) -> Result<f64> {
    for r in [bernstein, hoeffding] {
        if r.horizon != n as f64 || r.gamma != gamma {
            return Err(Error::InvalidArgument(format!(
                "bound computed at (n, γ) = ({}, {}) but requested ({n}, {gamma})",
                r.horizon, r.gamma
            )));
        }
        if r.two_sided {
            return Err(Error::InvalidArgument(
                "confidence bounds take one-sided results".into(),
            ));
        }
    }
    let best = [bernstein, hoeffding]
        .iter()
        .filter(|r| r.valid)
        .map(|r| r.probability_bound)
        .fold(1.0f64, f64::min);
    Ok((1.0 - 2.0 * best).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn consts(b: f64, c: f64, eps: f64, n_rho: f64) -> BoundConstants {
        BoundConstants {
            b: Some(b),
            c: Some(c),
            epsilon: Some(eps),
            n_rho: Some(n_rho),
            ..Default::default()
        }
    }

    #[test]
    fn h_values() {
        assert_eq!(h_function(0.0).unwrap(), 0.5);
        assert_relative_eq!(h_function(3.0).unwrap(), 2.0 / 9.0, epsilon = 1e-15);
        // √(4/3) + 1/6 + 1
        let expected = 1.0 / ((4.0f64 / 3.0).sqrt() + 1.0 / 6.0 + 1.0);
        assert_relative_eq!(h_function(1.0 / 3.0).unwrap(), expected, epsilon = 1e-15);
        assert!((h_function(1.0 / 3.0).unwrap() - 0.430781).abs() < 1e-6);
        assert!(h_function(-0.1).is_err());
    }

    #[test]
    fn bernstein_arithmetic() {
        let r = bernstein_bound(&consts(1.0, 1.0, 0.5, 1.0), 0.1, 100, true);
        let expected = -100.0 * (0.01 * 0.5 / 6.0) * h(1.0 / 3.0);
        assert_relative_eq!(r.exponent, expected, epsilon = 1e-15);
        assert!((r.exponent + 0.0359).abs() < 1e-4);
        assert!((r.probability_bound - 0.96474).abs() < 1e-5);
        assert!(r.valid);
    }

    #[test]
    fn bernstein_small_gamma_tends_to_prefactor() {
        let r = bernstein_bound(&consts(1.0, 1.0, 0.5, 0.7), 1e-9, 10, true);
        assert!((r.probability_bound - 0.7).abs() < 1e-9);
        let r = bernstein_bound(&consts(1.0, 1.0, 0.5, 3.0), 1e-9, 10, true);
        assert_eq!(r.probability_bound, 1.0);
    }

    #[test]
    fn bernstein_degenerate_and_invalid() {
        let r = bernstein_bound(&consts(0.0, 0.0, 0.5, 1.0), 0.1, 10, true);
        assert!(r.valid && r.probability_bound == 0.0);
        let r = bernstein_bound(&consts(1.0, 1.0, 0.0, 1.0), 0.1, 10, true);
        assert!(!r.valid && r.probability_bound == 1.0);
        let r = bernstein_bound(&consts(1.0, 1.0, 0.5, 1.0), 0.1, 10, false);
        assert!(!r.valid);
    }

    fn hk(c: f64, g: f64) -> BoundConstants {
        BoundConstants {
            c: Some(c),
            g: Some(g),
            ..Default::default()
        }
    }

    #[test]
    fn hoeffding_regimes() {
        // boundary: nγ = 2G
        let r = hoeffding_bound(&hk(1.0, 2.5), 0.5, 10);
        assert!(r.valid && r.exponent == 0.0 && r.probability_bound == 1.0);
        let r = hoeffding_bound(&hk(1.0, 2.5), 0.4, 10);
        assert!(!r.valid && r.reason.as_deref() == Some("outside regime"));
        let r = hoeffding_bound(&hk(1.0, 2.5), 5.0, 1);
        assert!(r.valid && r.probability_bound == 0.0);
        let r = hoeffding_bound(&hk(1.0, 2.0), 1.0, 20);
        assert_relative_eq!(
            r.exponent,
            -(16.0f64 * 16.0) / (2.0 * 19.0 * 4.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn counting_arithmetic() {
        let k = BoundConstants {
            m: Some(0.25),
            b: Some(0.5),
            alpha: Some(1.0),
            epsilon: Some(0.4),
            n_rho: Some(1.0),
            ..Default::default()
        };
        let r = counting_bound(&k, 0.2, 100.0, true);
        assert_relative_eq!(r.exponent, -0.5, epsilon = 1e-14);
        assert!((r.probability_bound - 0.6065306597).abs() < 1e-9);
        let r = counting_bound(&k, 1e-9, 100.0, true);
        assert!((r.probability_bound - 1.0).abs() < 1e-9);
    }

    #[test]
    fn confidence_arithmetic() {
        let b = bernstein_bound(&consts(1.0, 1.0, 0.5, 1.0), 0.1, 100, true);
        let mut b5 = b.clone();
        b5.probability_bound = 0.05;
        let h = hoeffding_bound(&hk(1.0, 100.0), 0.1, 100);
        assert!(!h.valid);
        assert_relative_eq!(
            confidence_lower_bound(100, 0.1, &b5, &h).unwrap(),
            0.9,
            epsilon = 1e-15
        );
        assert_eq!(confidence_lower_bound(100, 0.1, &b, &h).unwrap(), 0.0);
        assert!(confidence_lower_bound(50, 0.1, &b, &h).is_err());
    }

    #[test]
    fn two_sided_doubles() {
        let r = bernstein_bound(&consts(1.0, 1.0, 0.5, 1.0), 0.3, 400, true);
        let t = r.clone().two_sided();
        assert_relative_eq!(
            t.probability_bound,
            2.0 * r.probability_bound,
            epsilon = 1e-15
        );
    }

    proptest! {
        #[test]
        fn h_decreasing(x in 0.0f64..100.0, dx in 1e-6f64..10.0) {
            let a = h_function(x).unwrap();
            let b = h_function(x + dx).unwrap();
            prop_assert!(b < a);
            prop_assert!(a > 0.0 && a <= 0.5);
        }

        #[test]
        fn bernstein_monotone(b in 0.05f64..2.0, extra in 0.0f64..2.0, eps in 0.01f64..1.0,
                              g in 0.01f64..1.0, dg in 0.0f64..1.0, n in 1u64..1000, dn in 0u64..1000) {
            let k = consts(b, b + extra, eps, 1.0);
            let r0 = bernstein_bound(&k, g, n, true);
            prop_assert!(r0.exponent <= 0.0 && r0.probability_bound <= 1.0);
            prop_assert!(bernstein_bound(&k, g + dg, n, true).exponent <= r0.exponent);
            let r1 = bernstein_bound(&k, g, n + dn, true);
            prop_assert!(r1.exponent <= r0.exponent);
            prop_assert!(r1.probability_bound <= r0.probability_bound);
        }

        #[test]
        fn hoeffding_monotone(c in 0.1f64..2.0, ratio in 1.0f64..5.0, g in 0.01f64..2.0,
                              n in 2u64..2000, dn in 0u64..2000) {
            let k = hk(c, c * ratio);
            let r0 = hoeffding_bound(&k, g, n);
            let r1 = hoeffding_bound(&k, g, n + dn);
            prop_assert!(r0.probability_bound <= 1.0);
            if r0.valid {
                prop_assert!(r1.valid);
                prop_assert!(r1.probability_bound <= r0.probability_bound + 1e-15);
            }
        }

        #[test]
        fn counting_monotone(m in 0.0f64..2.0, b in 0.0f64..2.0, a in 0.0f64..2.0, eps in 0.01f64..2.0,
                             g in 0.01f64..1.0, dg in 0.0f64..1.0, t in 0.0f64..500.0, dt in 0.0f64..500.0) {
            let k = BoundConstants { m: Some(m), b: Some(b), alpha: Some(a), epsilon: Some(eps),
                                     n_rho: Some(1.0), ..Default::default() };
            let r0 = counting_bound(&k, g, t, true);
            prop_assert!(r0.exponent <= 0.0);
            prop_assert!(counting_bound(&k, g + dg, t, true).exponent <= r0.exponent);
            prop_assert!(counting_bound(&k, g, t + dt, true).probability_bound <= r0.probability_bound);
        }
    }
}
