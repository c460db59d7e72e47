//! Dense complex matrix helpers.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. Vectorization is
//! column stacking, which coincides with nalgebra's column-major storage, so
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)` throughout the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(d: usize) -> CMat {
    CMat::zeros(d, d)
}

/// `|a⟩⟨b|` in the computational basis.
pub fn ket_bra(d: usize, a: usize, b: usize) -> CMat {
    let mut m = zeros(d);
    m[(a, b)] = ONE;
    m
}

pub fn diag_real(values: &[f64]) -> CMat {
    let d = values.len();
    let mut m = zeros(d);
    for (k, v) in values.iter().enumerate() {
        m[(k, k)] = real(*v);
    }
    m
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let d = rows.len();
    CMat::from_fn(d, rows[0].len(), |i, j| real(rows[i][j]))
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

/// Column-stacked vectorization.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVec, d: usize) -> CMat {
    CMat::from_column_slice(d, d, v.as_slice())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Permutation matrix `Π` with `Π vec(x) = vec(xᵀ)`.
pub fn transpose_permutation(d: usize) -> CMat {
    let n = d * d;
    let mut p = CMat::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            // vec index of (i, j) is i + j*d; of the transpose entry (j, i) is j + i*d
            p[(j + i * d, i + j * d)] = ONE;
        }
    }
    p
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * real(0.5)
}

/// Largest entrywise modulus of `m - m*`.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Eigendecomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let d = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).0
}

/// Functional calculus `g(m)` for a Hermitian `m`.
pub fn herm_fn(m: &CMat, g: impl Fn(f64) -> f64) -> CMat {
    let (values, vectors) = eigh(m);
    let d = values.len();
    let mut scaled = vectors.clone();
    for (k, v) in values.iter().enumerate() {
        let gk = real(g(*v));
        for r in 0..d {
            scaled[(r, k)] *= gk;
        }
    }
    scaled * vectors.adjoint()
}

/// Largest singular value (operator norm on ℂ^d).
pub fn uniform_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0f64, |a, &b| a.max(b))
}

/// Sum of singular values.
pub fn trace_norm(m: &CMat) -> f64 {
    m.singular_values().iter().sum()
}

pub fn hs_norm(m: &CMat) -> f64 {
    m.norm()
}

/// Eigenvalues of a general complex matrix, from the diagonal of its complex
/// Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<Complex64> {
    let t = nalgebra::linalg::Schur::new(m.clone()).unpack().1;
    (0..t.nrows()).map(|k| t[(k, k)]).collect()
}

/// Orthonormal basis (as columns) of the numerical kernel of `m`: right
/// singular vectors whose singular value is at most `tol * max(1, ‖m‖)`.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let n = m.ncols();
    // pad to square so that the SVD yields a full set of right singular vectors
    let padded = if m.nrows() < n {
        let mut p = CMat::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let scale = svd.singular_values.iter().fold(1.0f64, |a, &b| a.max(b));
    let cols: Vec<CVec> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol * scale)
        .map(|(k, _)| v_t.row(k).adjoint())
        .collect();
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Orthonormal basis of the orthogonal complement of `v` in ℂⁿ.
pub fn orthogonal_complement(v: &CVec) -> CMat {
    let n = v.len();
    let row = CMat::from_fn(1, n, |_, j| v[j].conj());
    null_space(&row, 1e-12)
}

/// Gram–Schmidt step: returns the component of `v` orthogonal to the
/// orthonormal columns in `basis`.
pub fn residual_against(basis: &[CVec], v: &CVec) -> CVec {
    let mut r = v.clone();
    // two passes for numerical orthogonality
    for _ in 0..2 {
        for b in basis {
            let proj = b.dotc(&r);
            r -= b * proj;
        }
    }
    r
}

/// Smallest eigenvalue of the Hermitian part after rescaling `m` so that its
/// trace is real and positive; used to test positive definiteness of an
/// eigenvector returned up to a complex phase.
pub fn phase_fixed_hermitian(m: &CMat) -> CMat {
    let tr = m.trace();
    let phase = if tr.norm() > 1e-300 {
        tr.conj() / tr.norm()
    } else {
        // fall back to the largest entry
        let (mut best, mut z) = (0.0, ONE);
        for e in m.iter() {
            if e.norm() > best {
                best = e.norm();
                z = e.conj() / e.norm();
            }
        }
        z
    };
    hermitian_part(&(m * phase))
}
