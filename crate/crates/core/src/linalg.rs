//! Dense linear-algebra helpers shared by the physics modules.
//!
//! Small complex operators (d ≤ 64) live in `nalgebra`; the large real
//! symmetric eigenproblems and Gram products on operator space
//! (dimension d²−1, up to 1023 here) go through `faer`, which is several
//! times faster at that size. `faer` is built without its thread pool, so
//! every result is independent of the number of worker threads.

use faer::{Accum, MatMut, MatRef, Par, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_real(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `max |U†U − I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let mut g = u.adjoint() * u;
    for i in 0..n {
        g[(i, i)] -= c(1.0);
    }
    max_abs(&g)
}

/// `max |H − H†|`.
pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Hilbert–Schmidt inner product `Tr(A†B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn hs_norm_sqr(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// `(A + A†) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        let n = h.nrows();
        let eig = nalgebra::SymmetricEigen::new(hermitian_part(h));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self { values, vectors }
    }

    /// `V f(Λ) V†` for a complex-valued spectral function.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let weights: Vec<Complex64> = self.values.iter().map(|&lam| f(lam)).collect();
        self.with_weights(&weights)
    }

    /// `V diag(w) V†` with `w` given in eigenvalue order.
    pub fn with_weights(&self, weights: &[Complex64]) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &w) in weights.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `exp(−i t H)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        self.apply_fn(|lam| Complex64::from_polar(1.0, -lam * t))
    }
}

/// `exp(−i t H)` for Hermitian `H`, via its eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    HermitianEigen::new(h).propagator(t)
}

/// One Newton–Schulz polar step, `U (3I − U†U) / 2`, pulling a nearly
/// unitary matrix back onto the unitary group (quadratic convergence).
pub fn polish_unitary(u: &CMatrix) -> CMatrix {
    let n = u.nrows();
    let mut g = -(u.adjoint() * u);
    for i in 0..n {
        g[(i, i)] += c(3.0);
    }
    u * g * c(0.5)
}

fn faer_ref(m: &DMatrix<f64>) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn faer_mut(m: &mut DMatrix<f64>) -> MatMut<'_, f64> {
    let (r, cols) = m.shape();
    MatMut::from_column_major_slice_mut(m.as_mut_slice(), r, cols)
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 {
            return Ok(Self { values: vec![], vectors: DMatrix::zeros(0, 0) });
        }
        let evd = faer_ref(m)
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numeric(format!("symmetric eigensolver failed: {e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        // faer returns ascending order
        let values = (0..n).rev().map(|k| s[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
        Ok(Self { values, vectors })
    }
}

/// Eigenvalues (descending) of a complex Hermitian matrix through `faer`,
/// used for the large Gram matrices of the span oracle.
pub fn hermitian_eigenvalues_desc(m: &CMatrix) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(vec![]);
    }
    let view = MatRef::from_column_major_slice(m.as_slice(), n, n);
    let vals = view
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("hermitian eigensolver failed: {e:?}")))?;
    let mut vals: Vec<f64> = vals.into_iter().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// `acc += rowsᵀ · rows`.
pub fn accumulate_gram(acc: &mut DMatrix<f64>, rows: &DMatrix<f64>) {
    assert_eq!(acc.nrows(), rows.ncols());
    let lhs = faer_ref(rows).transpose();
    let rhs = faer_ref(rows);
    faer::linalg::matmul::matmul(faer_mut(acc), Accum::Add, lhs, rhs, 1.0, Par::Seq);
}

/// `a · b` for real matrices.
pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    faer::linalg::matmul::matmul(faer_mut(&mut out), Accum::Replace, faer_ref(a), faer_ref(b), 1.0, Par::Seq);
    out
}

/// `aᵀ · b` for real matrices.
pub fn matmul_tn(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.ncols(), b.ncols());
    faer::linalg::matmul::matmul(
        faer_mut(&mut out),
        Accum::Replace,
        faer_ref(a).transpose(),
        faer_ref(b),
        1.0,
        Par::Seq,
    );
    out
}

/// `aᴴ · a` for a complex matrix whose columns are vectorized operators.
pub fn complex_gram(a: &CMatrix) -> CMatrix {
    let (r, cols) = a.shape();
    let mut out = CMatrix::zeros(cols, cols);
    let view = MatRef::from_column_major_slice(a.as_slice(), r, cols);
    let dst = MatMut::from_column_major_slice_mut(out.as_mut_slice(), cols, cols);
    faer::linalg::matmul::matmul(dst, Accum::Replace, view.adjoint(), view, Complex64::new(1.0, 0.0), Par::Seq);
    out
}

/// Number of eigenvalues above `relative · max(eigenvalues)`.
pub fn numerical_rank(eigenvalues: &[f64], relative: f64) -> usize {
    let top = eigenvalues.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&l| l > top * relative).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_pauli_x() {
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let t = 0.3_f64;
        let u = expm_hermitian(&x, t);
        assert!((u[(0, 0)] - c(t.cos())).norm() < 1e-14);
        assert!((u[(0, 1)] - (-I * t.sin())).norm() < 1e-14);
        assert!(unitarity_defect(&u) < 1e-14);
    }

    #[test]
    fn symmetric_eigen_is_descending_and_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let e = SymmetricEigen::new(&m).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = &e.vectors * DMatrix::from_diagonal(&DVector::from_vec(e.values.clone())) * e.vectors.transpose();
        assert!(max_abs_real(&(rebuilt - m)) < 1e-12);
    }

    #[test]
    fn gram_accumulation_matches_naive() {
        let rows = DMatrix::from_fn(5, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 0.5));
        let mut acc = DMatrix::identity(3, 3);
        accumulate_gram(&mut acc, &rows);
        let naive = DMatrix::identity(3, 3) + rows.transpose() * &rows;
        assert!(max_abs_real(&(acc - naive)) < 1e-12);
    }

    #[test]
    fn polish_restores_unitarity() {
        let u = expm_hermitian(&CMatrix::from_fn(3, 3, |i, j| c((i + j) as f64)), 0.7);
        let noisy = &u + CMatrix::from_element(3, 3, c(1e-9));
        assert!(unitarity_defect(&polish_unitary(&noisy)) < 1e-15 * 100.0);
    }
}
