use serde::{Deserialize, Serialize};

use super::discrete::DiscreteModel;
use super::formulas::{martingale_bound, BoundConstants, BoundResult, Flavor};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat};
use crate::spectral::poisson_solve_with;

/// A function on `I^m`, stored in lexicographic order with the first
/// (earliest) outcome most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFunction {
    pub m: usize,
    pub outcomes: usize,
    pub values: Vec<f64>,
}

impl WindowFunction {
    pub fn new(m: usize, outcomes: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 || outcomes == 0 {
            return Err(Error::InvalidArgument(
                "window length and outcome count must be positive".into(),
            ));
        }
        let expected = outcomes
            .checked_pow(m as u32)
            .ok_or_else(|| Error::Infeasible("window table too large".into()))?;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "window values must be finite".into(),
            ));
        }
        Ok(WindowFunction {
            m,
            outcomes,
            values,
        })
    }

    pub fn from_fn(m: usize, outcomes: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let total = outcomes.pow(m as u32);
        let values = (0..total).map(|idx| f(&decode(idx, m, outcomes))).collect();
        WindowFunction::new(m, outcomes, values)
    }

    pub fn index(&self, window: &[usize]) -> usize {
        window.iter().fold(0, |a, &j| a * self.outcomes + j)
    }

    pub fn eval(&self, window: &[usize]) -> f64 {
        self.values[self.index(window)]
    }

    pub fn shifted(&self, by: f64) -> Self {
        WindowFunction {
            m: self.m,
            outcomes: self.outcomes,
            values: self.values.iter().map(|v| v - by).collect(),
        }
    }
}

fn decode(mut idx: usize, m: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; m];
    for slot in out.iter_mut().rev() {
        *slot = idx % k;
        idx /= k;
    }
    out
}

/// `X(j₁…j_k) = V_{j₁}* ⋯ V_{j_k}* V_{j_k} ⋯ V_{j₁}` for every tuple of length
/// `k`, in lexicographic order. The probability of observing `j₁…j_k` from
/// state `ρ` is `tr(ρ X(j₁…j_k))`.
pub fn effect_table(model: &DiscreteModel, k: usize) -> Vec<CMat> {
    let ch = &model.channel;
    let mut table = vec![linalg::identity(ch.dim)];
    for _ in 0..k {
        // prepend one outcome: X(j, rest) = V_j* X(rest) V_j
        let mut next = Vec::with_capacity(table.len() * ch.len());
        for v in &ch.kraus {
            for x in &table {
                next.push(v.adjoint() * x * v);
            }
        }
        table = next;
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultitimeReport {
    pub bound: BoundResult,
    /// Stationary law of `m` consecutive outcomes.
    pub window_law: Vec<f64>,
    /// `‖F_m‖∞` with `F_m = Σ f(j) X(j)`.
    pub f_m_norm: f64,
    /// `‖A_f‖∞` for the centered solution of `(Id − Φ)(A_f) = F_m`.
    pub a_f_norm: f64,
    /// `max_i ‖B(i)‖∞` of the correction `B(i) = Σ_{k<m} F_k(i)`.
    pub b_norm: f64,
}

/// Hoeffding bound for window averages `(1/n) Σ_{k=1}^n f(X_k, …, X_{k+m−1})`
/// with `G = (m + ‖(Id − Φ)⁻¹|F‖∞) c`; `f` is centered against the
/// stationary window law.
pub fn multitime_hoeffding(
    model: &DiscreteModel,
    f: &WindowFunction,
    gamma: f64,
    n: u64,
) -> Result<MultitimeReport> {
    if f.outcomes != model.channel.len() {
        return Err(Error::DimensionMismatch {
            expected: model.channel.len(),
            got: f.outcomes,
        });
    }
    let m = f.m;
    let effects = effect_table(model, m);
    let window_law: Vec<f64> = effects
        .iter()
        .map(|x| (&model.sigma * x).trace().re.max(0.0))
        .collect();
    let mean: f64 = window_law.iter().zip(&f.values).map(|(p, v)| p * v).sum();
    let centered = f.shifted(mean);
    let c = window_law
        .iter()
        .zip(&centered.values)
        .filter(|(p, _)| **p > 0.0)
        .fold(0.0f64, |a, (_, v)| a.max(v.abs()));

    let mut f_m = linalg::zeros(model.dim());
    for (x, v) in effects.iter().zip(&centered.values) {
        f_m += x * real(*v);
    }
    let res = model.resolvent()?;
    let norm = model.resolvent_norm()?;
    let a_f = poisson_solve_with(res, &model.channel, &f_m)?;

    // B(i) = Σ_{k=1}^{m−1} Σ_{j₁…j_k} f(i_{k+1}, …, i_m, j₁, …, j_k) X(j₁…j_k)
    let mut b_norm = 0.0f64;
    if m > 1 {
        let tables: Vec<Vec<CMat>> = (1..m).map(|k| effect_table(model, k)).collect();
        for idx in 0..centered.values.len() {
            let window = decode(idx, m, f.outcomes);
            let mut b = linalg::zeros(model.dim());
            for k in 1..m {
                for (jdx, x) in tables[k - 1].iter().enumerate() {
                    let tail = decode(jdx, k, f.outcomes);
                    let mut w: Vec<usize> = window[k..].to_vec();
                    w.extend_from_slice(&tail);
                    b += x * real(centered.eval(&w));
                }
            }
            b_norm = b_norm.max(linalg::uniform_norm(&b));
        }
    }

    let k = BoundConstants {
        mean: Some(mean),
        c: Some(c),
        g: Some((m as f64 + norm.certified_upper) * c),
        resolvent_upper: Some(norm.certified_upper),
        resolvent_lower: Some(norm.lower_estimate),
        ..Default::default()
    };
    let bound = martingale_bound(Flavor::Multitime, &k, gamma, n, 2.0, 2.0);
    Ok(MultitimeReport {
        bound,
        window_law,
        f_m_norm: linalg::uniform_norm(&f_m),
        a_f_norm: linalg::uniform_norm(&a_f),
        b_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::operator::Tolerances;
    use approx::assert_relative_eq;

    fn ring() -> DiscreteModel {
        DiscreteModel::new(fixtures::ring(), Tolerances::default()).unwrap()
    }

    #[test]
    fn window_one_is_hoeffding() {
        let m = ring();
        let f = fixtures::ring_observation();
        let w = WindowFunction::new(1, 6, f.values.clone()).unwrap();
        for &(g, n) in &[(0.5, 100u64), (0.9, 40), (0.1, 10)] {
            let a = multitime_hoeffding(&m, &w, g, n).unwrap().bound;
            let b = m.hoeffding(&f, g, n).unwrap();
            assert_eq!(a.valid, b.valid);
            assert_relative_eq!(a.probability_bound, b.probability_bound, epsilon = 1e-14);
        }
    }

    #[test]
    fn pair_law_is_a_distribution_matching_the_chain() {
        let m = ring();
        let effects = effect_table(&m, 2);
        let law: Vec<f64> = effects.iter().map(|x| (&m.sigma * x).trace().re).collect();
        assert_relative_eq!(law.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // up then up from site k requires the second up to start at k+1
        let w = WindowFunction::from_fn(2, 6, |_| 0.0).unwrap();
        let up0_up1 = law[w.index(&[0, 1])];
        let up0_up0 = law[w.index(&[0, 0])];
        assert_relative_eq!(up0_up1, 1.0 / 3.0 * 0.5 * 0.5, epsilon = 1e-12);
        assert!(up0_up0.abs() < 1e-14);
    }

    #[test]
    fn consecutive_ups_pair_indicator() {
        let m = ring();
        let f = WindowFunction::from_fn(2, 6, |w| if w[0] < 3 && w[1] < 3 { 1.0 } else { 0.0 })
            .unwrap();
        let rep = multitime_hoeffding(&m, &f, 0.3, 500).unwrap();
        assert_relative_eq!(rep.bound.constants.mean.unwrap(), 0.25, epsilon = 1e-12);
        assert_relative_eq!(rep.bound.constants.c.unwrap(), 0.75, epsilon = 1e-12);
        assert!(
            rep.a_f_norm <= rep.bound.constants.resolvent_upper.unwrap() * rep.f_m_norm + 1e-12
        );
        let zero = WindowFunction::from_fn(2, 6, |_| 0.0).unwrap();
        let r = multitime_hoeffding(&m, &zero, 0.1, 10).unwrap().bound;
        assert!(r.valid && r.probability_bound == 0.0);
    }
}
