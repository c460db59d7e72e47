use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vectorization {
    /// `vec(x)` stacks the columns of `x`; `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
    ColumnStacking,
}

/// Dense `d² × d²` matrix of a linear map on `d × d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    pub dim: usize,
    pub matrix: CMat,
    pub convention: Vectorization,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMat) -> Self {
        assert_eq!(matrix.nrows(), dim * dim);
        assert_eq!(matrix.ncols(), dim * dim);
        Superoperator {
            dim,
            matrix,
            convention: Vectorization::ColumnStacking,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(dim, linalg::identity(dim * dim))
    }

    /// `x ↦ Σ W* x W`.
    pub fn heisenberg_kraus(kraus: &[CMat]) -> Self {
        let d = kraus[0].nrows();
        let mut m = CMat::zeros(d * d, d * d);
        for w in kraus {
            m += linalg::kron(&w.transpose(), &w.adjoint());
        }
        Self::from_matrix(d, m)
    }

    /// `ρ ↦ Σ W ρ W*`.
    pub fn schrodinger_kraus(kraus: &[CMat]) -> Self {
        let d = kraus[0].nrows();
        let mut m = CMat::zeros(d * d, d * d);
        for w in kraus {
            m += linalg::kron(&w.conjugate(), w);
        }
        Self::from_matrix(d, m)
    }

    /// Matrix of an arbitrary linear action, built column by column from the
    /// images of the matrix units.
    pub fn from_action(dim: usize, action: impl Fn(&CMat) -> CMat) -> Self {
        let n = dim * dim;
        let mut m = CMat::zeros(n, n);
        for j in 0..dim {
            for i in 0..dim {
                let e = linalg::ket_bra(dim, i, j);
                let col = linalg::vec_of(&action(&e));
                m.set_column(i + j * dim, &col);
            }
        }
        Self::from_matrix(dim, m)
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        linalg::unvec(&(&self.matrix * linalg::vec_of(x)), self.dim)
    }

    /// Dual with respect to the trace pairing `tr(x η(y)) = tr(η*(x) y)`.
    pub fn trace_dual(&self) -> Self {
        let p = linalg::transpose_permutation(self.dim);
        Self::from_matrix(self.dim, &p * self.matrix.transpose() * &p)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Superoperator) -> Self {
        Self::from_matrix(self.dim, &self.matrix * &other.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<num_complex::Complex64> {
        linalg::eigenvalues(&self.matrix)
    }

    /// Largest residual of the matrix action against `action` over all
    /// matrix units.
    pub fn action_residual(&self, action: impl Fn(&CMat) -> CMat) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.dim {
            for i in 0..self.dim {
                let e = linalg::ket_bra(self.dim, i, j);
                worst = worst.max(linalg::max_abs(&(self.apply(&e) - action(&e))));
            }
        }
        worst
    }
}
