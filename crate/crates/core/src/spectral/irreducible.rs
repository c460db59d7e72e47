use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cplx, real, CMat, CVec};
use crate::operator::{DensityMatrix, Kms, KrausChannel, Superoperator, Tolerances};

/// Evidence gathered by [`is_irreducible`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilityReport {
    pub irreducible: bool,
    /// Number of eigenvalues within `τ_eig` of the spectral radius.
    pub leading_multiplicity: usize,
    pub spectral_radius: f64,
    /// Smallest eigenvalue of the normalized leading eigenvector of the map
    /// and of its trace dual (`None` when the eigenvalue is not simple).
    pub eigenvector_min: Option<f64>,
    pub dual_eigenvector_min: Option<f64>,
    pub eigen_test: bool,
    /// Dimension of the unital algebra generated by the Kraus operators.
    pub algebra_dimension: usize,
    pub reachability_test: bool,
    /// Dimension of the orbit of one random vector under Kraus products.
    pub random_orbit_dimension: usize,
}

/// Spectral diagnostics of a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Eigenvalues of `Φ`, sorted by decreasing modulus.
    pub eigenvalues: Vec<(f64, f64)>,
    pub spectral_radius: f64,
    /// `r − |λ₂|` where `λ₂` is the subdominant eigenvalue.
    pub gap: f64,
    pub peripheral: Vec<(f64, f64)>,
    pub irreducible: bool,
    pub primitive: bool,
    /// `None` when no faithful invariant state is available.
    pub kms_selfadjoint: Option<bool>,
}

pub(crate) fn sorted_eigenvalues(m: &Superoperator) -> Vec<Complex64> {
    let mut ev = m.eigenvalues();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    ev
}

/// Phase-fixes a vectorized eigenvector, returns the smallest eigenvalue of
/// its trace-normalized Hermitian part (or of the version scaled by its
/// largest eigenvalue when the trace vanishes).
fn positivity_of(v: &CVec, d: usize) -> f64 {
    let m = linalg::phase_fixed_hermitian(&linalg::unvec(v, d));
    let ev = linalg::eigvalsh(&m);
    let scale = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    ev[0] / scale
}

/// Dimension of the span of `{W_{i_n}⋯W_{i_1} x : n ≥ 0}` for a starting set
/// of matrices `x`, computed by breadth-first closure with Gram–Schmidt on
/// the vectorized products.
fn closure_dimension(kraus: &[CMat], start: Vec<CMat>, tol: f64) -> usize {
    let (rows, cols) = (start[0].nrows(), start[0].ncols());
    let mut basis: Vec<CVec> = Vec::new();
    let mut frontier: Vec<CMat> = Vec::new();
    let push = |m: &CMat, basis: &mut Vec<CVec>, frontier: &mut Vec<CMat>| {
        let v = linalg::vec_of(m);
        let n = v.norm();
        if n == 0.0 {
            return;
        }
        let r = linalg::residual_against(basis, &(v / real(n)));
        let rn = r.norm();
        if rn > tol {
            let u = r / real(rn);
            frontier.push(CMat::from_column_slice(rows, cols, u.as_slice()));
            basis.push(u);
        }
    };
    for s in &start {
        push(s, &mut basis, &mut frontier);
    }
    while let Some(x) = frontier.pop() {
        for w in kraus {
            push(&(w * &x), &mut basis, &mut frontier);
        }
    }
    basis.len()
}

fn algebra_dimension(kraus: &[CMat], d: usize) -> usize {
    closure_dimension(kraus, vec![linalg::identity(d)], 1e-9)
}

fn random_orbit_dimension(kraus: &[CMat], d: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CMat::from_fn(d, 1, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        cplx(re, im)
    });
    closure_dimension(kraus, vec![v], 1e-9)
}

/// Irreducibility of the completely positive map `x ↦ Σ W* x W`, decided by
/// two methods that must agree:
///
/// * eigenstructure: the spectral radius is an algebraically simple
///   eigenvalue whose eigenvectors (of the map and of its trace dual) are
///   positive definite;
/// * reachability: the Kraus operators have no common invariant subspace,
///   i.e. the unital algebra they generate is all of `M_d` (Burnside).
///
/// The orbit of one random vector is recorded as extra evidence.
pub fn irreducibility_of_kraus(kraus: &[CMat], tol: &Tolerances) -> Result<IrreducibilityReport> {
    let d = kraus[0].nrows();
    let m = Superoperator::heisenberg_kraus(kraus);
    let ev = sorted_eigenvalues(&m);
    let r = ev[0].norm();
    let leading = ev
        .iter()
        .filter(|z| (**z - real(r)).norm() <= tol.eig * r.max(1.0))
        .count();
    let (mut emin, mut dmin) = (None, None);
    if leading == 1 {
        let shift = linalg::identity(d * d) * real(r);
        let k = linalg::null_space(&(&m.matrix - &shift), tol.eig);
        let kd = linalg::null_space(&(m.trace_dual().matrix - &shift), tol.eig);
        if k.ncols() == 1 && kd.ncols() == 1 {
            emin = Some(positivity_of(&k.column(0).into_owned(), d));
            dmin = Some(positivity_of(&kd.column(0).into_owned(), d));
        }
    }
    let eigen_test =
        leading == 1 && emin.is_some_and(|v| v > tol.psd) && dmin.is_some_and(|v| v > tol.psd);
    let algebra = algebra_dimension(kraus, d);
    let reach = algebra == d * d;
    let report = IrreducibilityReport {
        irreducible: eigen_test && reach,
        leading_multiplicity: leading,
        spectral_radius: r,
        eigenvector_min: emin,
        dual_eigenvector_min: dmin,
        eigen_test,
        algebra_dimension: algebra,
        reachability_test: reach,
        random_orbit_dimension: random_orbit_dimension(kraus, d, 0x5eed),
    };
    if eigen_test != reach {
        return Err(Error::InconclusiveIrreducibility(format!(
            "eigenstructure test says {eigen_test}, reachability test says {reach} \
             (leading multiplicity {leading}, algebra dimension {algebra} of {})",
            d * d
        )));
    }
    Ok(report)
}

pub fn is_irreducible(channel: &KrausChannel, tol: &Tolerances) -> Result<IrreducibilityReport> {
    irreducibility_of_kraus(&channel.kraus, tol)
}

/// Aperiodicity: the only eigenvalue with modulus at least `1 − τ_per` is 1.
pub fn is_primitive(channel: &KrausChannel, tol: &Tolerances) -> Result<bool> {
    let rep = is_irreducible(channel, tol)?;
    if !rep.irreducible {
        return Err(Error::Reducible);
    }
    let m = Superoperator::heisenberg_kraus(&channel.kraus);
    let ev = sorted_eigenvalues(&m);
    Ok(ev
        .iter()
        .filter(|z| z.norm() >= 1.0 - tol.peripheral)
        .all(|z| (*z - real(1.0)).norm() <= tol.peripheral))
}

/// Unique invariant state of `Φ*`.
pub fn invariant_state(channel: &KrausChannel, tol: &Tolerances) -> Result<DensityMatrix> {
    let d = channel.dim;
    let m = Superoperator::schrodinger_kraus(&channel.kraus);
    let shifted = &m.matrix - linalg::identity(d * d);
    let k = linalg::null_space(&shifted, tol.eig);
    let v =
        match k.ncols() {
            1 => k.column(0).into_owned(),
            0 => {
                // accept the least singular direction if it is numerically a fixed point
                let svd = shifted.clone().svd(false, true);
                let (idx, smin) = svd.singular_values.iter().enumerate().fold(
                    (0, f64::INFINITY),
                    |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc },
                );
                if smin > 1e-6 {
                    return Err(Error::NoFixedPoint);
                }
                svd.v_t.expect("right singular vectors").row(idx).adjoint()
            }
            n => return Err(Error::NonUniqueFixedPoint(n)),
        };
    let sigma = linalg::unvec(&v, d);
    let sigma = linalg::phase_fixed_hermitian(&sigma);
    let tr = sigma.trace().re;
    if tr.abs() < 1e-300 {
        return Err(Error::Numerical("fixed point has zero trace".into()));
    }
    let sigma = sigma / real(tr);
    let residual = linalg::max_abs(&(channel.schrodinger(&sigma) - &sigma));
    if residual > 1e-11_f64.max(tol.identity) {
        return Err(Error::Numerical(format!(
            "invariant state residual {residual:e}"
        )));
    }
    DensityMatrix::new(sigma, tol)
}

pub fn spectral_report(channel: &KrausChannel, tol: &Tolerances) -> Result<SpectralReport> {
    let m = Superoperator::heisenberg_kraus(&channel.kraus);
    let ev = sorted_eigenvalues(&m);
    let r = ev[0].norm();
    let peripheral: Vec<Complex64> = ev
        .iter()
        .copied()
        .filter(|z| z.norm() >= r - tol.peripheral)
        .collect();
    let second = ev.get(1).map(|z| z.norm()).unwrap_or(0.0);
    let irr = is_irreducible(channel, tol)?;
    let primitive = irr.irreducible
        && peripheral
            .iter()
            .all(|z| (*z - real(1.0)).norm() <= tol.peripheral);
    let kms_selfadjoint = invariant_state(channel, tol)
        .ok()
        .and_then(|s| Kms::new(s.matrix(), tol).ok())
        .map(|k| k.selfadjointness_residual(&m) < 1e-10);
    Ok(SpectralReport {
        eigenvalues: ev.iter().map(|z| (z.re, z.im)).collect(),
        spectral_radius: r,
        gap: (r - second).clamp(0.0, r),
        peripheral: peripheral.iter().map(|z| (z.re, z.im)).collect(),
        irreducible: irr.irreducible,
        primitive,
        kms_selfadjoint,
    })
}
