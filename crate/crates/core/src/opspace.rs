//! Operator-space algebra: the generalized Gell-Mann basis, Bloch vectors,
//! vectorization and adjoint-action superoperators.
//!
//! Vectorization is row-stacking, `vec(X)[i·d + j] = X[i, j]`. With that
//! convention `vec(A X B) = (A ⊗ Bᵀ) vec(X)`, so the Heisenberg step
//! `O ↦ U† O U` is the superoperator `U† ⊗ Uᵀ`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, I};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// One generalized Gell-Mann matrix, by the indices it touches (0-based,
/// `j < k`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisElement {
    /// `(|j⟩⟨k| + |k⟩⟨j|) / √2`
    Symmetric { j: usize, k: usize },
    /// `(−i|j⟩⟨k| + i|k⟩⟨j|) / √2`
    Antisymmetric { j: usize, k: usize },
    /// `(Σ_{m<l} |m⟩⟨m| − l|l⟩⟨l|) / √(l(l+1))`, `1 ≤ l ≤ d−1`
    Diagonal { l: usize },
}

/// Orthonormal traceless Hermitian basis `{E_α}` of `su(d)` under the
/// Hilbert–Schmidt metric.
///
/// Ordering is fixed: all symmetric elements, then all antisymmetric ones,
/// each in lexicographic `(j, k)` order, then the diagonal ones by `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<BasisElement>,
}

impl OperatorBasis {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let mut elements = Vec::with_capacity(d * d - 1);
        for j in 0..d {
            for k in j + 1..d {
                elements.push(BasisElement::Symmetric { j, k });
            }
        }
        for j in 0..d {
            for k in j + 1..d {
                elements.push(BasisElement::Antisymmetric { j, k });
            }
        }
        for l in 1..d {
            elements.push(BasisElement::Diagonal { l });
        }
        Ok(Self { dim: d, elements })
    }

    pub fn dim_hilbert(&self) -> usize {
        self.dim
    }

    /// `d² − 1`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    /// Dense matrix of element `alpha`.
    pub fn matrix(&self, alpha: usize) -> CMatrix {
        let d = self.dim;
        let mut m = CMatrix::zeros(d, d);
        match self.elements[alpha] {
            BasisElement::Symmetric { j, k } => {
                m[(j, k)] = c(SQRT_HALF);
                m[(k, j)] = c(SQRT_HALF);
            }
            BasisElement::Antisymmetric { j, k } => {
                m[(j, k)] = -I * SQRT_HALF;
                m[(k, j)] = I * SQRT_HALF;
            }
            BasisElement::Diagonal { l } => {
                let norm = ((l * (l + 1)) as f64).sqrt();
                for mm in 0..l {
                    m[(mm, mm)] = c(1.0 / norm);
                }
                m[(l, l)] = c(-(l as f64) / norm);
            }
        }
        m
    }

    /// Coordinates `Tr(O E_α)` of a Hermitian operator. Only the Hermitian
    /// part of `op` contributes.
    pub fn coefficients(&self, op: &CMatrix) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        self.coefficients_into(op, out.as_mut_slice());
        out
    }

    pub fn coefficients_into(&self, op: &CMatrix, out: &mut [f64]) {
        debug_assert_eq!(op.nrows(), self.dim);
        debug_assert_eq!(out.len(), self.len());
        let d = self.dim;
        // running prefix sums of the real diagonal
        let mut prefix = Vec::with_capacity(d + 1);
        prefix.push(0.0);
        for m in 0..d {
            prefix.push(prefix[m] + op[(m, m)].re);
        }
        for (slot, el) in out.iter_mut().zip(&self.elements) {
            *slot = match *el {
                BasisElement::Symmetric { j, k } => SQRT_HALF * (op[(j, k)].re + op[(k, j)].re),
                BasisElement::Antisymmetric { j, k } => SQRT_HALF * (op[(k, j)].im - op[(j, k)].im),
                BasisElement::Diagonal { l } => {
                    let norm = ((l * (l + 1)) as f64).sqrt();
                    (prefix[l] - l as f64 * op[(l, l)].re) / norm
                }
            };
        }
    }

    /// `Σ_α x_α E_α`.
    pub fn synthesize(&self, coords: &[f64]) -> CMatrix {
        debug_assert_eq!(coords.len(), self.len());
        let d = self.dim;
        let mut m = CMatrix::zeros(d, d);
        let mut diag_tail = vec![0.0; d + 1];
        for (&x, el) in coords.iter().zip(&self.elements) {
            match *el {
                BasisElement::Symmetric { j, k } => {
                    m[(j, k)] += c(SQRT_HALF * x);
                    m[(k, j)] += c(SQRT_HALF * x);
                }
                BasisElement::Antisymmetric { j, k } => {
                    m[(j, k)] += -I * (SQRT_HALF * x);
                    m[(k, j)] += I * (SQRT_HALF * x);
                }
                BasisElement::Diagonal { l } => {
                    let norm = ((l * (l + 1)) as f64).sqrt();
                    // contributes x/norm to every m < l
                    diag_tail[l] += x / norm;
                    m[(l, l)] += c(-(l as f64) * x / norm);
                }
            }
        }
        // diagonal m receives Σ_{l > m} x_l / norm_l
        let mut acc = 0.0;
        for mm in (0..d).rev() {
            m[(mm, mm)] += c(acc);
            acc += diag_tail[mm];
        }
        m
    }
}

pub fn build_basis(d: usize) -> Result<OperatorBasis> {
    OperatorBasis::new(d)
}

/// Generalized Bloch vector: `ρ = I/d + Σ r_α E_α`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector(pub DVector<f64>);

impl BlochVector {
    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }
}

impl From<DVector<f64>> for BlochVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

const STATE_TOL: f64 = 1e-10;

pub fn bloch_from_density(rho: &CMatrix, basis: &OperatorBasis) -> Result<BlochVector> {
    let d = basis.dim_hilbert();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho.nrows() });
    }
    let herm = linalg::hermiticity_defect(rho);
    if herm > STATE_TOL {
        return Err(Error::InvalidState(format!("density matrix not Hermitian (defect {herm:.3e})")));
    }
    let tr = linalg::trace(rho).re;
    if (tr - 1.0).abs() > STATE_TOL {
        return Err(Error::InvalidState(format!("density matrix has trace {tr}")));
    }
    Ok(BlochVector(basis.coefficients(rho)))
}

/// `I/d + Σ r_α E_α`. Hermitian with unit trace, not necessarily positive.
pub fn density_from_bloch(r: &BlochVector, basis: &OperatorBasis) -> Result<CMatrix> {
    if r.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: r.len() });
    }
    let d = basis.dim_hilbert();
    let mut m = basis.synthesize(r.0.as_slice());
    for i in 0..d {
        m[(i, i)] += c(1.0 / d as f64);
    }
    Ok(m)
}

/// `|ψ⟩⟨ψ|`.
pub fn pure_density(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

/// Row-stacking vectorization.
pub fn vectorize(op: &CMatrix) -> CVector {
    let (r, cols) = op.shape();
    CVector::from_fn(r * cols, |idx, _| op[(idx / cols, idx % cols)])
}

pub fn unvectorize(v: &CVector, d: usize) -> Result<CMatrix> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, got: v.len() });
    }
    Ok(CMatrix::from_fn(d, d, |i, j| v[i * d + j]))
}

/// A linear map on d×d operators.
pub trait OperatorMap {
    fn hilbert_dim(&self) -> usize;
    fn apply(&self, op: &CMatrix) -> CMatrix;
    /// Upper bound on the operator norm of the map (Hilbert–Schmidt metric).
    fn norm_bound(&self) -> f64;
}

/// Dense d²×d² matrix acting on row-stacked operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(matrix: CMatrix, dim: usize) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: matrix.nrows() });
        }
        Ok(Self { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: CMatrix::identity(dim * dim, dim * dim) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply_vec(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator { dim: self.dim, matrix: &self.matrix * &other.matrix }
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.matrix)
    }
}

impl OperatorMap for Superoperator {
    fn hilbert_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, op: &CMatrix) -> CMatrix {
        let out = &self.matrix * vectorize(op);
        CMatrix::from_fn(self.dim, self.dim, |i, j| out[i * self.dim + j])
    }

    fn norm_bound(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub const UNITARY_TOL: f64 = 1e-10;

pub fn check_unitary(u: &CMatrix) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::DimensionMismatch { expected: u.nrows(), got: u.ncols() });
    }
    let defect = linalg::unitarity_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    Ok(())
}

/// Superoperator `U† ⊗ Uᵀ` of the adjoint action `O ↦ U† O U`.
pub fn adjoint_superoperator(u: &CMatrix) -> Result<Superoperator> {
    check_unitary(u)?;
    let d = u.nrows();
    Ok(Superoperator { dim: d, matrix: u.adjoint().kronecker(&u.transpose()) })
}

/// `Tr(O E_α)²` summed over the basis, i.e. `‖O‖²` restricted to the
/// traceless part.
pub fn traceless_norm_sqr(op: &CMatrix) -> f64 {
    let d = op.nrows() as f64;
    let tr = linalg::trace(op);
    linalg::hs_norm_sqr(op) - tr.norm_sqr() / d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hs_inner, max_abs};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn random_hermitian(d: usize, rng: &mut impl rand::Rng) -> CMatrix {
        let a = CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        linalg::hermitian_part(&a)
    }

    fn random_unitary(d: usize, rng: &mut impl rand::Rng) -> CMatrix {
        linalg::expm_hermitian(&random_hermitian(d, rng), 3.0)
    }

    #[test]
    fn qubit_basis_is_scaled_paulis() {
        let b = build_basis(2).unwrap();
        assert_eq!(b.len(), 3);
        let s = SQRT_HALF;
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(s), c(s), c(0.0)]);
        let y = CMatrix::from_row_slice(2, 2, &[c(0.0), -I * s, I * s, c(0.0)]);
        let z = CMatrix::from_row_slice(2, 2, &[c(s), c(0.0), c(0.0), c(-s)]);
        assert!(max_abs(&(b.matrix(0) - x)) < 1e-15);
        assert!(max_abs(&(b.matrix(1) - y)) < 1e-15);
        assert!(max_abs(&(b.matrix(2) - z)) < 1e-15);
    }

    #[test]
    fn basis_counts_and_ordering() {
        let b = build_basis(4).unwrap();
        assert_eq!(b.len(), 15);
        assert_eq!(b.elements()[0], BasisElement::Symmetric { j: 0, k: 1 });
        assert_eq!(b.elements()[6], BasisElement::Antisymmetric { j: 0, k: 1 });
        assert_eq!(b.elements()[12], BasisElement::Diagonal { l: 1 });
    }

    #[test]
    fn rejects_trivial_dimension() {
        assert!(matches!(build_basis(1), Err(Error::InvalidDimension(1))));
        assert!(build_basis(0).is_err());
    }

    #[test]
    fn gram_matrix_is_identity() {
        for d in [2usize, 3, 5, 8] {
            let b = build_basis(d).unwrap();
            let mats: Vec<_> = (0..b.len()).map(|a| b.matrix(a)).collect();
            let mut worst: f64 = 0.0;
            for (a, ea) in mats.iter().enumerate() {
                assert!(linalg::trace(ea).norm() < 1e-12);
                for (bb, eb) in mats.iter().enumerate() {
                    let g = hs_inner(ea, eb);
                    let target = if a == bb { 1.0 } else { 0.0 };
                    worst = worst.max((g - c(target)).norm());
                }
            }
            assert!(worst < 1e-14, "d={d}: {worst}");
        }
    }

    #[test]
    fn large_basis_orthonormality_via_coefficients() {
        // Tr(E_α E_β) = coefficients(E_β)[α]; the structured and dense routes
        // must agree on every element.
        for d in [16usize, 32] {
            let b = build_basis(d).unwrap();
            let mut worst: f64 = 0.0;
            for beta in 0..b.len() {
                let coeffs = b.coefficients(&b.matrix(beta));
                for (alpha, x) in coeffs.iter().enumerate() {
                    let target = if alpha == beta { 1.0 } else { 0.0 };
                    worst = worst.max((x - target).abs());
                }
            }
            assert!(worst <= 1e-12, "d={d}: {worst}");
        }
    }

    #[test]
    fn coefficients_match_dense_traces() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let b = build_basis(5).unwrap();
        let h = random_hermitian(5, &mut rng);
        let fast = b.coefficients(&h);
        for alpha in 0..b.len() {
            let dense = linalg::trace(&(&h * b.matrix(alpha)));
            assert!((dense.re - fast[alpha]).abs() < 1e-14);
            assert!(dense.im.abs() < 1e-14);
        }
    }

    #[test]
    fn bloch_of_maximally_mixed_and_ground_state() {
        let b = build_basis(3).unwrap();
        let mixed = CMatrix::identity(3, 3) * c(1.0 / 3.0);
        assert!(bloch_from_density(&mixed, &b).unwrap().norm_squared() < 1e-30);

        let q = build_basis(2).unwrap();
        let mut zero = CMatrix::zeros(2, 2);
        zero[(0, 0)] = c(1.0);
        let r = bloch_from_density(&zero, &q).unwrap();
        assert!((r.0[0]).abs() < 1e-15 && (r.0[1]).abs() < 1e-15);
        assert!((r.0[2] - SQRT_HALF).abs() < 1e-15);
    }

    #[test]
    fn pure_state_purity_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let b = build_basis(4).unwrap();
        let psi = CVector::from_fn(4, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let psi = &psi / c(psi.norm());
        let rho = pure_density(&psi);
        let r = bloch_from_density(&rho, &b).unwrap();
        assert!((r.norm_squared() - 0.75).abs() < 1e-12);
        // Tr(ρ²) computed directly agrees with 1/d + ‖r‖²
        let purity = linalg::trace(&(&rho * &rho)).re;
        assert!((purity - (0.25 + r.norm_squared())).abs() < 1e-12);
    }

    #[test]
    fn invalid_states_are_rejected() {
        let b = build_basis(2).unwrap();
        let bad_trace = CMatrix::identity(2, 2);
        assert!(matches!(bloch_from_density(&bad_trace, &b), Err(Error::InvalidState(_))));
        let mut non_herm = CMatrix::identity(2, 2) * c(0.5);
        non_herm[(0, 1)] = c(0.3);
        assert!(matches!(bloch_from_density(&non_herm, &b), Err(Error::InvalidState(_))));
        assert!(matches!(
            density_from_bloch(&BlochVector::zeros(5), &b),
            Err(Error::DimensionMismatch { expected: 3, got: 5 })
        ));
    }

    #[test]
    fn oversized_bloch_vector_is_unphysical_but_accepted() {
        let b = build_basis(2).unwrap();
        let mut zero = CMatrix::zeros(2, 2);
        zero[(0, 0)] = c(1.0);
        let r = bloch_from_density(&zero, &b).unwrap();
        let big = BlochVector(r.0 * 2.0);
        let m = density_from_bloch(&big, &b).unwrap();
        assert!((linalg::trace(&m).re - 1.0).abs() < 1e-15);
        let eig = linalg::HermitianEigen::new(&m);
        assert!((eig.values[0] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn identity_superoperator_and_pauli_flip() {
        let s = adjoint_superoperator(&CMatrix::identity(3, 3)).unwrap();
        assert!(max_abs(&(s.matrix() - CMatrix::identity(9, 9))) < 1e-15);

        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let z = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        let flipped = adjoint_superoperator(&x).unwrap().apply_vec(&vectorize(&z));
        assert!((flipped - vectorize(&(-z))).norm() < 1e-15);
    }

    #[test]
    fn non_unitary_superoperator_input_is_rejected() {
        let m = CMatrix::identity(2, 2) * c(1.1);
        assert!(matches!(adjoint_superoperator(&m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn superoperator_matches_conjugation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(4, &mut rng);
        let o = random_hermitian(4, &mut rng);
        let s = adjoint_superoperator(&u).unwrap();
        assert!(s.unitarity_defect() < 1e-10);
        let direct = u.adjoint() * &o * &u;
        assert!(max_abs(&(s.apply(&o) - direct)) < 1e-12);
    }

    proptest! {
        #[test]
        fn bloch_round_trip(seed in any::<u64>(), d in 2usize..7) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b = build_basis(d).unwrap();
            let h = random_hermitian(d, &mut rng);
            let mut rho = &h * &h + CMatrix::identity(d, d) * c(0.1);
            let tr = linalg::trace(&rho);
            rho /= tr;
            let r = bloch_from_density(&rho, &b).unwrap();
            let back = density_from_bloch(&r, &b).unwrap();
            prop_assert!(max_abs(&(back - rho)) < 1e-12);
        }

        #[test]
        fn unitary_invariance_of_euclidean_norm(seed in any::<u64>(), d in 2usize..9) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b = build_basis(d).unwrap();
            let o = random_hermitian(d, &mut rng);
            let u = random_unitary(d, &mut rng);
            let before = b.coefficients(&o).norm_squared();
            let after = b.coefficients(&(u.adjoint() * &o * &u)).norm_squared();
            prop_assert!((before - after).abs() < 1e-10);
        }

        #[test]
        fn superoperator_composition_reverses_order(seed in any::<u64>(), d in 2usize..5) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u1 = random_unitary(d, &mut rng);
            let u2 = random_unitary(d, &mut rng);
            let o = random_hermitian(d, &mut rng);
            let joint = adjoint_superoperator(&(&u1 * &u2)).unwrap();
            let chained = adjoint_superoperator(&u2).unwrap().compose(&adjoint_superoperator(&u1).unwrap());
            prop_assert!(max_abs(&(joint.apply(&o) - chained.apply(&o))) < 1e-10);
        }
    }
}
