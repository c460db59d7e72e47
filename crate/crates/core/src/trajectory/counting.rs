use nalgebra::Schur;
use num_complex::Complex64;
use rand::Rng;

use super::{stream_rng, CountingRecord};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat, ZERO};
use crate::operator::GklsGenerator;

/// Relative accuracy of the waiting-time bisection.
const BISECTION_TOLERANCE: f64 = 1e-10;
/// Largest condition number accepted for the eigenvector basis of `G`.
const MAX_CONDITION: f64 = 1e8;

/// Evaluates the unnormalized no-jump evolution `e^{τG} ρ e^{τG*}`, through
/// an eigendecomposition `G = W Λ W⁻¹` when it is well conditioned and the
/// matrix exponential otherwise.
#[derive(Debug, Clone)]
pub struct NoJumpPropagator {
    g: CMat,
    eigen: Option<Eigen>,
    /// Operator norm of `G`, setting the first bracket `1/‖G‖`.
    pub g_norm: f64,
}

#[derive(Debug, Clone)]
struct Eigen {
    w: CMat,
    w_inv: CMat,
    lambda: Vec<Complex64>,
    /// `W* W`, so that `tr(W E X E* W*) = Σ_{ab} X_ab (W*W)_ba e^{τ(λ_a + λ̄_b)}`.
    gram: CMat,
}

/// Eigenvectors of an upper triangular matrix by back substitution; `None`
/// when eigenvalues nearly coincide.
fn triangular_eigenvectors(t: &CMat) -> Option<CMat> {
    let d = t.nrows();
    let scale = linalg::max_abs(t).max(1e-300);
    let mut x = linalg::zeros(d);
    for k in 0..d {
        x[(k, k)] = linalg::ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for l in j + 1..=k {
                acc += t[(j, l)] * x[(l, k)];
            }
            let denom = t[(j, j)] - t[(k, k)];
            if denom.norm() < 1e-9 * scale {
                // repeated eigenvalue: fine only if it decouples
                if acc.norm() > 1e-12 * scale {
                    return None;
                }
                x[(j, k)] = ZERO;
            } else {
                x[(j, k)] = -acc / denom;
            }
        }
        let n = x.column(k).norm();
        x.column_mut(k).unscale_mut(n);
    }
    Some(x)
}

impl NoJumpPropagator {
    pub fn new(gen: &GklsGenerator) -> Self {
        let g = gen.g();
        let g_norm = linalg::uniform_norm(&g);
        let eigen = Schur::new(g.clone()).unpack();
        let (u, t) = eigen;
        let eigen = triangular_eigenvectors(&t).and_then(|x| {
            let w = &u * x;
            let w_inv = w.clone().try_inverse()?;
            let cond = linalg::uniform_norm(&w) * linalg::uniform_norm(&w_inv);
            if !(cond < MAX_CONDITION) {
                return None;
            }
            let lambda: Vec<Complex64> = (0..t.nrows()).map(|k| t[(k, k)]).collect();
            let lam = CMat::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone()));
            let residual = linalg::max_abs(&(&w * lam * &w_inv - &g));
            if residual > 1e-10 * g_norm.max(1.0) {
                return None;
            }
            let gram = w.adjoint() * &w;
            Some(Eigen {
                w,
                w_inv,
                lambda,
                gram,
            })
        });
        NoJumpPropagator { g, eigen, g_norm }
    }

    pub fn uses_eigen_cache(&self) -> bool {
        self.eigen.is_some()
    }

    /// Prepared evaluation of the survival function `τ ↦ tr(e^{τG} ρ e^{τG*})`.
    fn survival<'a>(&'a self, rho: &'a CMat) -> Survival<'a> {
        let coeffs = self.eigen.as_ref().map(|e| {
            let x = &e.w_inv * rho * e.w_inv.adjoint();
            let d = x.nrows();
            let mut terms = Vec::with_capacity(d * d);
            for a in 0..d {
                for b in 0..d {
                    let c = x[(a, b)] * e.gram[(b, a)];
                    terms.push((c, e.lambda[a] + e.lambda[b].conj()));
                }
            }
            terms
        });
        Survival {
            prop: self,
            rho,
            coeffs,
        }
    }

    /// `e^{τG} ρ e^{τG*}`.
    pub fn evolve(&self, tau: f64, rho: &CMat) -> CMat {
        match &self.eigen {
            Some(e) => {
                let x = &e.w_inv * rho * e.w_inv.adjoint();
                let d = x.nrows();
                let mut y = x.clone();
                for a in 0..d {
                    for b in 0..d {
                        y[(a, b)] = x[(a, b)] * (tau * (e.lambda[a] + e.lambda[b].conj())).exp();
                    }
                }
                &e.w * y * e.w.adjoint()
            }
            None => {
                let u = (&self.g * real(tau)).exp();
                &u * rho * u.adjoint()
            }
        }
    }
}

struct Survival<'a> {
    prop: &'a NoJumpPropagator,
    rho: &'a CMat,
    coeffs: Option<Vec<(Complex64, Complex64)>>,
}

impl Survival<'_> {
    fn at(&self, tau: f64) -> f64 {
        match &self.coeffs {
            Some(terms) => {
                terms
                    .iter()
                    .map(|(c, l)| c * (l * tau).exp())
                    .sum::<Complex64>()
                    .re
            }
            None => self.prop.evolve(tau, self.rho).trace().re,
        }
    }
}

/// Samples one trajectory of detector clicks on `[0, t]`.
pub fn sample_counting(
    gen: &GklsGenerator,
    rho0: &CMat,
    t: f64,
    seed: u64,
) -> Result<CountingRecord> {
    let prop = NoJumpPropagator::new(gen);
    sample_counting_stream(gen, &prop, rho0, t, seed, 0)
}

pub fn sample_counting_stream(
    gen: &GklsGenerator,
    prop: &NoJumpPropagator,
    rho0: &CMat,
    t: f64,
    seed: u64,
    stream: u64,
) -> Result<CountingRecord> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be nonnegative, got {t}"
        )));
    }
    if rho0.nrows() != gen.dim {
        return Err(Error::DimensionMismatch {
            expected: gen.dim,
            got: rho0.nrows(),
        });
    }
    let mut rng = stream_rng(seed, stream);
    let mut events = Vec::new();
    let mut now = 0.0;
    let mut rho = rho0.clone();
    let mut probs = vec![0.0; gen.jumps.len()];
    while now < t {
        let left = t - now;
        // u ∈ (0, 1]; the next click happens when the survival drops to u
        let u = 1.0 - rng.random::<f64>();
        let surv = prop.survival(&rho);
        let end = surv.at(left);
        if end > u {
            break;
        }
        let mut lo = 0.0;
        let mut hi = if prop.g_norm > 0.0 {
            (1.0 / prop.g_norm).min(left)
        } else {
            left
        };
        let mut s_lo = 1.0;
        loop {
            let s_hi = surv.at(hi);
            if s_hi > s_lo + 1e-9 {
                return Err(Error::Numerical("survival function increases".into()));
            }
            if s_hi <= u {
                break;
            }
            lo = hi;
            s_lo = s_hi;
            hi = (2.0 * hi).min(left);
        }
        while hi - lo > BISECTION_TOLERANCE * hi {
            let mid = 0.5 * (lo + hi);
            if surv.at(mid) > u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = hi;
        let pre = prop.evolve(tau, &rho);
        let mut total = 0.0;
        for (p, l) in probs.iter_mut().zip(&gen.jumps) {
            *p = (l * &pre * l.adjoint()).trace().re.max(0.0);
            total += *p;
        }
        if !(total > 0.0) {
            return Err(Error::FilterCollapse);
        }
        let x = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = 0;
        for (k, p) in probs.iter().enumerate() {
            if *p > 0.0 {
                acc += p;
                pick = k;
                if x < acc {
                    break;
                }
            }
        }
        let l = &gen.jumps[pick];
        rho = l * pre * l.adjoint() / real(probs[pick]);
        now += tau;
        if now <= t {
            events.push((now, pick));
        }
    }
    Ok(CountingRecord {
        horizon: t,
        events,
        seed,
        stream,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn no_jumps_no_events() {
        let gen = GklsGenerator::unlabeled(fixtures::pauli_z(), vec![linalg::zeros(2)]).unwrap();
        let r = sample_counting(&gen, &linalg::ket_bra(2, 0, 0), 10.0, 1).unwrap();
        assert!(r.events.is_empty());
    }

    #[test]
    fn propagator_paths_agree() {
        let gen = fixtures::driven_qubit(1.0, 0.5);
        let prop = NoJumpPropagator::new(&gen);
        assert!(prop.uses_eigen_cache());
        let rho = linalg::ket_bra(2, 0, 0);
        for &tau in &[0.0, 0.3, 2.0, 7.5] {
            let a = prop.evolve(tau, &rho);
            let b = gen.no_jump_schrodinger(tau, &rho).unwrap();
            assert!(linalg::max_abs(&(a - b)) < 1e-10);
        }
    }

    #[test]
    fn events_are_increasing_and_reproducible() {
        let gen = fixtures::driven_qubit(1.0, 0.5);
        let rho = linalg::ket_bra(2, 0, 0);
        let a = sample_counting(&gen, &rho, 100.0, 17).unwrap();
        let b = sample_counting(&gen, &rho, 100.0, 17).unwrap();
        assert_eq!(a, b);
        assert!(!a.events.is_empty());
        assert!(a.events.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(a.events.iter().all(|e| e.0 <= 100.0));
    }

    #[test]
    fn zero_horizon() {
        let gen = fixtures::poisson_single(1.0);
        let r = sample_counting(&gen, &linalg::ket_bra(2, 0, 0), 0.0, 0).unwrap();
        assert!(r.events.is_empty());
    }
}
