use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::reaches;
use crate::bounds::WindowFunction;
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat};
use crate::operator::{KrausChannel, ObservationFunction};

/// Largest common denominator accepted for the partial-sum lattice.
pub const MAX_DENOMINATOR: i64 = 1_000_000;
/// Relative accuracy required when rationalizing observable values.
pub const RATIONAL_TOLERANCE: f64 = 1e-12;
/// Enumeration fallback handles at most this many sequences.
pub const ENUMERATION_LIMIT: u64 = 1 << 24;
/// Tolerance on the total mass of an exact distribution.
const MASS_TOLERANCE: f64 = 1e-11;

/// Best rational approximation with denominator at most `max_den`, by
/// continued fractions; `None` if none is within the tolerance.
fn rational(v: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    let target = tol * v.abs().max(1.0);
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = v;
    for _ in 0..64 {
        let a = x.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let a = a as i64;
        let p2 = a.checked_mul(p1)?.checked_add(p0)?;
        let q2 = a.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            return None;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if (v - p1 as f64 / q1 as f64).abs() <= target {
            return Some((p1, q1));
        }
        let frac = x - a as f64;
        if frac == 0.0 {
            return None;
        }
        x = 1.0 / frac;
    }
    None
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Writes every value as `k/D` for one common denominator `D ≤ 10⁶`.
pub fn rationalize(values: &[f64]) -> Result<(i64, Vec<i64>)> {
    let mut den = 1i64;
    for &v in values {
        let (_, q) = rational(v, MAX_DENOMINATOR, RATIONAL_TOLERANCE)
            .ok_or_else(|| Error::Rationalization(format!("{v} has no small denominator")))?;
        den = den / gcd(den, q) * q;
        if den > MAX_DENOMINATOR {
            return Err(Error::Rationalization(format!(
                "common denominator exceeds {MAX_DENOMINATOR}"
            )));
        }
    }
    let scores = values
        .iter()
        .map(|v| (v * den as f64).round() as i64)
        .collect();
    Ok((den, scores))
}

/// Exact law of a sum of `n` scores on the lattice `ℤ/D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumDistribution {
    pub denominator: i64,
    /// Number of terms in the sum.
    pub terms: u64,
    /// Probability of each lattice value `s` (the sum equals `s/D`).
    pub masses: BTreeMap<i64, f64>,
    pub total_mass: f64,
}

impl SumDistribution {
    /// From lattice masses; fails when they do not sum to one.
    pub fn from_masses(denominator: i64, terms: u64, masses: BTreeMap<i64, f64>) -> Result<Self> {
        let total_mass: f64 = masses.values().sum();
        if (total_mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Numerical(format!(
                "dynamic programming lost mass: total {total_mass}"
            )));
        }
        Ok(SumDistribution {
            denominator,
            terms,
            masses,
            total_mass,
        })
    }

    fn from_operators(denominator: i64, terms: u64, ops: BTreeMap<i64, CMat>) -> Result<Self> {
        let masses = ops.into_iter().map(|(s, t)| (s, t.trace().re)).collect();
        Self::from_masses(denominator, terms, masses)
    }

    /// `P(sum/terms ≥ threshold)`.
    pub fn tail(&self, threshold: f64) -> f64 {
        let n = self.terms as f64;
        let d = self.denominator as f64;
        self.masses
            .iter()
            .filter(|(s, _)| reaches(**s as f64 / d, n, threshold))
            .map(|(_, m)| m)
            .fold(0.0, |a, m| a + m)
            .clamp(0.0, 1.0)
    }

    /// `P(sum/terms ≤ threshold)`.
    pub fn lower_tail(&self, threshold: f64) -> f64 {
        let n = self.terms as f64;
        let d = self.denominator as f64;
        self.masses
            .iter()
            .filter(|(s, _)| reaches(-(**s as f64) / d, n, -threshold))
            .map(|(_, m)| m)
            .fold(0.0, |a, m| a + m)
            .clamp(0.0, 1.0)
    }

    /// `P(|sum/terms − center| ≥ γ)`.
    pub fn two_sided_tail(&self, center: f64, gamma: f64) -> f64 {
        (self.tail(center + gamma) + self.lower_tail(center - gamma)).min(1.0)
    }

    /// `ln E[e^{u·sum}]`, by log-sum-exp.
    pub fn log_laplace(&self, u: f64) -> f64 {
        let d = self.denominator as f64;
        let terms: Vec<(f64, f64)> = self
            .masses
            .iter()
            .filter(|(_, m)| **m > 0.0)
            .map(|(s, m)| (u * *s as f64 / d, m.ln()))
            .collect();
        let top = terms
            .iter()
            .map(|(a, b)| a + b)
            .fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return top;
        }
        top + terms
            .iter()
            .map(|(a, b)| (a + b - top).exp())
            .sum::<f64>()
            .ln()
    }
}

fn check_state(kraus: &[CMat], rho0: &CMat) -> Result<()> {
    let d = kraus.first().map(|v| v.nrows()).unwrap_or(0);
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho0.nrows(),
        });
    }
    Ok(())
}

/// Forward recursion `T[s + f(i)] += V_i T[s] V_i*` over a cyclic schedule
/// of (Kraus operators, integer scores).
fn forward(rho0: &CMat, schedule: &[(&[CMat], Vec<i64>)], n: u64) -> BTreeMap<i64, CMat> {
    let mut ops = BTreeMap::new();
    ops.insert(0i64, rho0.clone());
    for k in 0..n as usize {
        let (kraus, scores) = &schedule[k % schedule.len()];
        let mut next: BTreeMap<i64, CMat> = BTreeMap::new();
        for (s, t) in &ops {
            for (v, score) in kraus.iter().zip(scores) {
                let img = v * t * v.adjoint();
                match next.get_mut(&(s + score)) {
                    Some(acc) => *acc += img,
                    None => {
                        next.insert(s + score, img);
                    }
                }
            }
        }
        ops = next;
    }
    ops
}

pub fn sum_distribution(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &ObservationFunction,
    n: u64,
) -> Result<SumDistribution> {
    f.check_len(channel.len())?;
    check_state(&channel.kraus, rho0)?;
    let (den, scores) = rationalize(&f.values)?;
    let ops = forward(rho0, &[(&channel.kraus, scores)], n);
    SumDistribution::from_operators(den, n, ops)
}

/// Exact law of `Σ_k f_k(X_k)` when step `k` is measured with
/// `steps[(k − 1) mod len]`.
pub fn schedule_sum_distribution(
    steps: &[(KrausChannel, ObservationFunction)],
    rho0: &CMat,
    n: u64,
) -> Result<SumDistribution> {
    if steps.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    let mut all = Vec::new();
    for (ch, f) in steps {
        f.check_len(ch.len())?;
        check_state(&ch.kraus, rho0)?;
        all.extend_from_slice(&f.values);
    }
    let (den, _) = rationalize(&all)?;
    let schedule: Vec<(&[CMat], Vec<i64>)> = steps
        .iter()
        .map(|(ch, f)| {
            let scores = f
                .values
                .iter()
                .map(|v| (v * den as f64).round() as i64)
                .collect();
            (ch.kraus.as_slice(), scores)
        })
        .collect();
    let ops = forward(rho0, &schedule, n);
    SumDistribution::from_operators(den, n, ops)
}

/// Exact law of `Σ_{k=1}^n f(X_k, …, X_{k+m−1})`, over `n + m − 1` outcomes.
pub fn window_sum_distribution(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &WindowFunction,
    n: u64,
) -> Result<SumDistribution> {
    if f.outcomes != channel.len() {
        return Err(Error::DimensionMismatch {
            expected: channel.len(),
            got: f.outcomes,
        });
    }
    check_state(&channel.kraus, rho0)?;
    let (den, scores) = rationalize(&f.values)?;
    let k_out = channel.len();
    let m = f.m;
    let tail_size = k_out.pow(m as u32 - 1);
    // key: (code of the last min(t, m−1) outcomes, partial sum)
    let mut ops: BTreeMap<(usize, i64), CMat> = BTreeMap::new();
    ops.insert((0, 0), rho0.clone());
    let steps = n as usize + m - 1;
    for t in 0..steps {
        let mut next: BTreeMap<(usize, i64), CMat> = BTreeMap::new();
        let full = t + 1 >= m;
        for ((code, s), op) in &ops {
            for (i, v) in channel.kraus.iter().enumerate() {
                let window = code * k_out + i;
                let (tail, s2) = if full {
                    (window % tail_size, s + scores[window])
                } else {
                    (window, *s)
                };
                let img = v * op * v.adjoint();
                match next.get_mut(&(tail, s2)) {
                    Some(acc) => *acc += img,
                    None => {
                        next.insert((tail, s2), img);
                    }
                }
            }
        }
        ops = next;
    }
    let mut by_sum: BTreeMap<i64, CMat> = BTreeMap::new();
    for ((_, s), op) in ops {
        match by_sum.get_mut(&s) {
            Some(acc) => *acc += op,
            None => {
                by_sum.insert(s, op);
            }
        }
    }
    SumDistribution::from_operators(den, n, by_sum)
}

/// `P_ρ(f̄_n ≥ γ)` by dynamic programming on the partial-sum lattice.
pub fn exact_tail_dp(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &ObservationFunction,
    n: u64,
    gamma: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(sum_distribution(channel, rho0, f, n)?.tail(gamma))
}

/// `P_ρ(f̄_n ≥ γ)` by summing over every outcome sequence.
pub fn exact_tail_enumeration(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &ObservationFunction,
    n: u64,
    gamma: f64,
) -> Result<f64> {
    f.check_len(channel.len())?;
    check_state(&channel.kraus, rho0)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let count = (channel.len() as u64).checked_pow(n as u32);
    if count.is_none_or(|c| c > ENUMERATION_LIMIT) {
        return Err(Error::Infeasible(format!(
            "{}^{n} sequences exceed the enumeration limit",
            channel.len()
        )));
    }
    fn walk(
        kraus: &[CMat],
        f: &[f64],
        state: &CMat,
        sum: f64,
        left: u64,
        n: f64,
        gamma: f64,
    ) -> f64 {
        if left == 0 {
            return if reaches(sum, n, gamma) {
                state.trace().re
            } else {
                0.0
            };
        }
        let mut total = 0.0;
        for (v, fi) in kraus.iter().zip(f) {
            let img = v * state * v.adjoint();
            if img.trace().re > 0.0 {
                total += walk(kraus, f, &img, sum + fi, left - 1, n, gamma);
            }
        }
        total
    }
    Ok(walk(&channel.kraus, &f.values, rho0, 0.0, n, n as f64, gamma).clamp(0.0, 1.0))
}

/// `P_ρ(|f̄_n − center| ≥ γ)` by dynamic programming.
pub fn exact_tail_two_sided(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &ObservationFunction,
    n: u64,
    center: f64,
    gamma: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(sum_distribution(channel, rho0, f, n)?.two_sided_tail(center, gamma))
}

/// Dynamic programming, falling back to enumeration when the values do not
/// rationalize.
pub fn exact_tail(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &ObservationFunction,
    n: u64,
    gamma: f64,
) -> Result<f64> {
    match exact_tail_dp(channel, rho0, f, n, gamma) {
        Err(Error::Rationalization(_)) => exact_tail_enumeration(channel, rho0, f, n, gamma),
        other => other,
    }
}

/// `ln tr(ρ Φ_uⁿ(1))` by repeated application, rescaling each step.
pub fn laplace_via_powers(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &ObservationFunction,
    n: u64,
    u: f64,
) -> Result<f64> {
    f.check_len(channel.len())?;
    check_state(&channel.kraus, rho0)?;
    let weights: Vec<f64> = f.values.iter().map(|v| (u * v).exp()).collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical(format!("e^{{u f}} overflows at u = {u}")));
    }
    let mut x = linalg::identity(channel.dim);
    let mut log_scale = 0.0;
    for _ in 0..n {
        let mut next = linalg::zeros(channel.dim);
        for (v, w) in channel.kraus.iter().zip(&weights) {
            next += v.adjoint() * &x * v * real(*w);
        }
        let s = linalg::max_abs(&next);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Numerical(
                "deformed powers vanished or overflowed".into(),
            ));
        }
        log_scale += s.ln();
        x = next / real(s);
    }
    let t = (rho0 * x).trace().re;
    if !(t > 0.0) {
        return Err(Error::Numerical("nonpositive Laplace transform".into()));
    }
    Ok(log_scale + t.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceTransform {
    /// `E_ρ[e^{u Σ f(X_k)}]` via `tr(ρ Φ_uⁿ(1))`.
    pub via_powers: f64,
    /// The same from the exact sum distribution.
    pub via_dp: f64,
    pub ln_via_powers: f64,
    pub ln_via_dp: f64,
}

pub fn laplace_transform_exact(
    channel: &KrausChannel,
    rho0: &CMat,
    f: &ObservationFunction,
    n: u64,
    u: f64,
) -> Result<LaplaceTransform> {
    let ln_p = laplace_via_powers(channel, rho0, f, n, u)?;
    let ln_d = sum_distribution(channel, rho0, f, n)?.log_laplace(u);
    Ok(LaplaceTransform {
        via_powers: ln_p.exp(),
        via_dp: ln_d.exp(),
        ln_via_powers: ln_p,
        ln_via_dp: ln_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    #[test]
    fn rationalization() {
        let (d, s) = rationalize(&[0.5, -1.0, 0.25, 1.0 / 3.0]).unwrap();
        assert_eq!(d, 12);
        assert_eq!(s, vec![6, -12, 3, 4]);
        let (d, s) = rationalize(&[0.6, -1.4]).unwrap();
        assert_eq!((d, s), (5, vec![3, -7]));
        assert!(matches!(
            rationalize(&[1.0 / 999_983.0, 1.0 / 999_979.0]),
            Err(Error::Rationalization(_))
        ));
        assert!(matches!(
            rationalize(&[1e-7 * 2f64.sqrt()]),
            Err(Error::Rationalization(_))
        ));
    }

    #[test]
    fn trivial_tails() {
        let ch = fixtures::ring();
        let rho = linalg::ket_bra(3, 0, 0);
        let zero = ObservationFunction::constant(6, 0.0);
        assert_eq!(exact_tail_dp(&ch, &rho, &zero, 5, 0.1).unwrap(), 0.0);
        assert_relative_eq!(
            exact_tail_dp(&ch, &rho, &zero, 5, 0.0).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            exact_tail_dp(&ch, &rho, &zero, 5, -0.3).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        // single step: up from site 0 with probability 1/2
        let f = fixtures::ring_observation();
        assert_relative_eq!(
            exact_tail_dp(&ch, &rho, &f, 1, 0.5).unwrap(),
            0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn dp_matches_enumeration() {
        for (ch, f) in [
            (fixtures::ring(), fixtures::ring_observation()),
            (
                fixtures::two_unitary_qubit(),
                fixtures::two_unitary_observation(),
            ),
        ] {
            let rho = linalg::ket_bra(ch.dim, 0, 0);
            for n in 1..=7 {
                for &g in &[-0.3, 0.0, 0.2, 0.5] {
                    let a = exact_tail_dp(&ch, &rho, &f, n, g).unwrap();
                    let b = exact_tail_enumeration(&ch, &rho, &f, n, g).unwrap();
                    assert!((a - b).abs() < 1e-11, "n={n} γ={g}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn mass_is_conserved() {
        let ch = fixtures::random_channel(3, 3, 5);
        let f = ObservationFunction::new(vec![1.0, 0.5, -2.0]).unwrap();
        let d = sum_distribution(&ch, &fixtures::random_state(3, 1), &f, 16).unwrap();
        assert!((d.total_mass - 1.0).abs() < 1e-11);
    }

    #[test]
    fn laplace_paths_agree() {
        let ch = fixtures::ring();
        let f = fixtures::ring_observation();
        let rho = linalg::ket_bra(3, 1, 1);
        let l = laplace_transform_exact(&ch, &rho, &f, 8, 0.1).unwrap();
        assert!((l.via_powers - l.via_dp).abs() < 1e-10);
        let l = laplace_transform_exact(&ch, &rho, &f, 8, 0.0).unwrap();
        assert_relative_eq!(l.via_powers, 1.0, epsilon = 1e-13);
        let c = ObservationFunction::constant(6, 0.75);
        let l = laplace_transform_exact(&ch, &rho, &c, 6, 0.2).unwrap();
        assert_relative_eq!(l.via_dp, (6.0f64 * 0.2 * 0.75).exp(), epsilon = 1e-12);
        assert_relative_eq!(l.via_powers, (6.0f64 * 0.2 * 0.75).exp(), epsilon = 1e-12);
    }

    #[test]
    fn window_one_matches_plain_dp() {
        let ch = fixtures::ring();
        let f = fixtures::ring_observation();
        let rho = linalg::ket_bra(3, 0, 0);
        let w = WindowFunction::new(1, 6, f.values.clone()).unwrap();
        let a = sum_distribution(&ch, &rho, &f, 9).unwrap();
        let b = window_sum_distribution(&ch, &rho, &w, 9).unwrap();
        assert_eq!(a.masses.len(), b.masses.len());
        for (x, y) in a.masses.values().zip(b.masses.values()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn pair_window_matches_enumeration() {
        let ch = fixtures::ring();
        let rho = linalg::ket_bra(3, 0, 0);
        let w = WindowFunction::from_fn(2, 6, |x| if x[0] < 3 && x[1] < 3 { 1.0 } else { 0.0 })
            .unwrap();
        let n = 4u64;
        let dist = window_sum_distribution(&ch, &rho, &w, n).unwrap();
        // brute force over 6^(n+1) sequences
        let mut probs = BTreeMap::new();
        let total = 6usize.pow(n as u32 + 1);
        for code in 0..total {
            let mut seq = Vec::new();
            let mut c = code;
            for _ in 0..=n {
                seq.push(c % 6);
                c /= 6;
            }
            let mut st = rho.clone();
            for &i in &seq {
                st = &ch.kraus[i] * st * ch.kraus[i].adjoint();
            }
            let s: i64 = seq.windows(2).map(|x| w.eval(x) as i64).sum();
            *probs.entry(s).or_insert(0.0) += st.trace().re;
        }
        for (s, p) in probs {
            assert!((dist.masses.get(&s).copied().unwrap_or(0.0) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_of_one_matches_plain_dp() {
        let ch = fixtures::ring();
        let f = fixtures::ring_observation();
        let rho = linalg::ket_bra(3, 0, 0);
        let a = sum_distribution(&ch, &rho, &f, 7).unwrap();
        let b = schedule_sum_distribution(&[(ch, f)], &rho, 7).unwrap();
        assert_eq!(a, b);
    }
}
