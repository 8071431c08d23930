//! Krylov-space description of operator growth under a time-independent
//! Hamiltonian: Liouvillian, full-orthogonalization Lanczos, Krylov
//! complexity and entropy, and a brute-force span-rank oracle.

use std::borrow::Cow;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::RANK_THRESHOLD;
use crate::linalg::{self, c, CMatrix, HermitianEigen};
use crate::opspace::{OperatorMap, Superoperator};
use crate::rng;

/// Default termination threshold for `b_k`, relative to `b_1`.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// `L = [H, ·]`, applied implicitly as `HX − XH`.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    h: CMatrix,
    eigen: HermitianEigen,
}

impl Liouvillian {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
        }
        let defect = linalg::hermiticity_defect(h);
        if defect > 1e-12 * (1.0 + linalg::max_abs(h)) {
            return Err(Error::NotHermitian(defect));
        }
        let h = linalg::hermitian_part(h);
        let eigen = HermitianEigen::new(&h);
        Ok(Self { h, eigen })
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eigen
    }

    /// Dense `H ⊗ I − I ⊗ Hᵀ` on row-stacked operators.
    pub fn to_superoperator(&self) -> Superoperator {
        let d = self.h.nrows();
        let id = CMatrix::identity(d, d);
        let m = self.h.kronecker(&id) - id.kronecker(&self.h.transpose());
        Superoperator::from_matrix(m, d).expect("shape is d²×d² by construction")
    }

    /// `e^{iHt} O e^{−iHt}`.
    pub fn evolve(&self, op: &CMatrix, t: f64) -> CMatrix {
        let u = self.eigen.propagator(t);
        u.adjoint() * op * u
    }
}

impl OperatorMap for Liouvillian {
    fn hilbert_dim(&self) -> usize {
        self.h.nrows()
    }

    fn apply(&self, op: &CMatrix) -> CMatrix {
        linalg::commutator(&self.h, op)
    }

    /// `E_max − E_min`, the exact operator norm of `[H, ·]`.
    fn norm_bound(&self) -> f64 {
        match (self.eigen.values.first(), self.eigen.values.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }
}

pub fn liouvillian(h: &CMatrix) -> Result<Liouvillian> {
    Liouvillian::new(h)
}

/// Relative tolerance for treating two transition frequencies as equal.
pub const FREQUENCY_MERGE: f64 = 1e-11;

/// Which basis the operators of a [`KrylovData`] are written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// The basis the Hamiltonian was given in.
    Computational,
    /// The eigenbasis of the Hamiltonian.
    Eigen,
}

/// `[H, ·]` written in the eigenbasis of `H`, where it acts diagonally:
/// `X̃_ij ↦ (E_i − E_j) X̃_ij`.
#[derive(Clone, Debug)]
pub struct EigenLiouvillian {
    omega: DMatrix<f64>,
    spread: f64,
}

impl OperatorMap for EigenLiouvillian {
    fn hilbert_dim(&self) -> usize {
        self.omega.nrows()
    }

    fn apply(&self, op: &CMatrix) -> CMatrix {
        op.zip_map(&self.omega, |z, w| z * w)
    }

    fn norm_bound(&self) -> f64 {
        self.spread
    }
}

impl Liouvillian {
    /// Distinct transition frequencies `E_i − E_j` and, for every element of a
    /// `d×d` operator (column-major), the index of its frequency. Frequencies
    /// that agree to within `FREQUENCY_MERGE · ‖L‖` share one value; they
    /// coincide in exact arithmetic (degenerate levels or gap coincidences).
    pub fn frequency_clusters(&self) -> (Vec<f64>, Vec<usize>) {
        let e = &self.eigen.values;
        let d = e.len();
        let raw: Vec<f64> = (0..d * d).map(|k| e[k % d] - e[k / d]).collect();
        let mut order: Vec<usize> = (0..d * d).collect();
        order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
        let tol = FREQUENCY_MERGE * self.norm_bound();
        let mut values = Vec::new();
        let mut labels = vec![0; d * d];
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && raw[order[end]] - raw[order[end - 1]] <= tol {
                end += 1;
            }
            let members = &order[start..end];
            let value = if members.iter().any(|&k| k % d == k / d) {
                0.0
            } else {
                members.iter().map(|&k| raw[k]).sum::<f64>() / members.len() as f64
            };
            for &k in members {
                labels[k] = values.len();
            }
            values.push(value);
            start = end;
        }
        (values, labels)
    }

    /// The diagonal form of `L`, with merged frequencies from
    /// [`Self::frequency_clusters`].
    pub fn eigen_frame(&self) -> EigenLiouvillian {
        let d = self.eigen.values.len();
        let (values, labels) = self.frequency_clusters();
        let omega = DMatrix::from_iterator(d, d, labels.iter().map(|&c| values[c]));
        EigenLiouvillian { omega, spread: self.norm_bound() }
    }

    /// `V† O V`.
    pub fn to_eigen_frame(&self, op: &CMatrix) -> CMatrix {
        let v = &self.eigen.vectors;
        v.adjoint() * op * v
    }

    /// [`Self::to_eigen_frame`] with elements below `tol · max|·|` set to
    /// zero. Eigenvector roundoff (of order `ε‖H‖/gap` for nearly degenerate
    /// levels) otherwise fills symmetry-forbidden elements with noise.
    pub fn to_eigen_frame_sanitized(&self, op: &CMatrix, tol: f64) -> CMatrix {
        let mut t = self.to_eigen_frame(op);
        let cut = tol * t.iter().map(|z| z.norm()).fold(0.0, f64::max);
        t.apply(|z| {
            if z.norm() <= cut {
                *z = c(0.0);
            }
        });
        t
    }

    pub fn from_eigen_frame(&self, op: &CMatrix) -> CMatrix {
        let v = &self.eigen.vectors;
        v * op * v.adjoint()
    }
}

/// [`lanczos_fo`] run in the eigenbasis of `H`, where `L` is diagonal.
///
/// Elements of `O` sharing a transition frequency form one invariant
/// direction, so the recursion runs on one real coordinate per frequency,
/// `‖P_ω O‖`, and the operators `Q_k` are rebuilt from it. The result is the
/// same recursion, but roundoff cannot split a frequency cluster or leak into
/// elements the exact Krylov space never reaches. Elements of `O` below
/// `zero_tol` relative to its largest one are dropped; their weight is below
/// what the `b_k` threshold can resolve.
pub fn krylov_chain(l: &Liouvillian, op: &CMatrix, zero_tol: f64) -> Result<KrylovData> {
    let d = l.hilbert_dim();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: op.nrows() });
    }
    if !(zero_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("zero_tol {zero_tol} must be > 0")));
    }
    let oe = l.to_eigen_frame_sanitized(op, zero_tol);
    let (values, labels) = l.frequency_clusters();
    let mut weight = vec![0.0; values.len()];
    for (z, &c) in oe.as_slice().iter().zip(&labels) {
        weight[c] += z.norm_sqr();
    }
    // occupied clusters only
    let occupied: Vec<usize> = (0..values.len()).filter(|&c| weight[c] > 0.0).collect();
    if occupied.is_empty() {
        return Err(Error::InvalidParameter("initial operator has zero norm".into()));
    }
    let mut slot = vec![usize::MAX; values.len()];
    for (s, &c) in occupied.iter().enumerate() {
        slot[c] = s;
    }
    let omega: Vec<f64> = occupied.iter().map(|&c| values[c]).collect();
    let amp: Vec<f64> = occupied.iter().map(|&c| weight[c].sqrt()).collect();

    let (coords, lanczos_b, terminal_b, threshold) = lanczos_diagonal(&omega, &amp, zero_tol, l.norm_bound())?;
    let basis = coords
        .iter()
        .map(|q| {
            let mut m = oe.clone();
            for (z, &c) in m.as_mut_slice().iter_mut().zip(&labels) {
                let s = slot[c];
                if s != usize::MAX {
                    *z *= q[s] / amp[s];
                }
            }
            m
        })
        .collect();
    Ok(KrylovData { basis, lanczos_b, terminal_b, zero_tol: threshold, frame: Frame::Eigen })
}

type DiagonalChain = (Vec<Vec<f64>>, Vec<f64>, f64, f64);

/// The [`lanczos_fo`] recursion for `diag(omega)` on a real start vector.
fn lanczos_diagonal(omega: &[f64], start: &[f64], zero_tol: f64, spread: f64) -> Result<DiagonalChain> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n0 = dot(start, start).sqrt();
    let mut basis = vec![start.iter().map(|x| x / n0).collect::<Vec<f64>>()];
    let mut lanczos_b = Vec::new();
    let mut threshold = zero_tol * spread.max(f64::MIN_POSITIVE);
    loop {
        let last = basis.last().expect("basis is non-empty");
        let mut b: Vec<f64> = last.iter().zip(omega).map(|(x, w)| x * w).collect();
        for _ in 0..2 {
            let overlaps: Vec<f64> = basis.iter().map(|q| dot(q, &b)).collect();
            for (q, ov) in basis.iter().zip(overlaps) {
                b.iter_mut().zip(q).for_each(|(x, y)| *x -= ov * y);
            }
        }
        let bk = dot(&b, &b).sqrt();
        if bk <= threshold {
            return Ok((basis, lanczos_b, bk, threshold));
        }
        if lanczos_b.is_empty() {
            threshold = zero_tol * bk;
        }
        if basis.len() >= omega.len() {
            return Err(Error::Numeric(format!("Lanczos did not terminate within {} steps", omega.len())));
        }
        lanczos_b.push(bk);
        basis.push(b.into_iter().map(|x| x / bk).collect());
    }
}

/// Orthonormal Krylov basis and Lanczos coefficients.
#[derive(Clone, Debug)]
pub struct KrylovData {
    basis: Vec<CMatrix>,
    lanczos_b: Vec<f64>,
    /// The residual norm at which the recursion stopped.
    terminal_b: f64,
    zero_tol: f64,
    frame: Frame,
}

impl KrylovData {
    /// Krylov dimension `K`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    /// `b_1 … b_{K−1}`, all above the termination threshold.
    pub fn lanczos_b(&self) -> &[f64] {
        &self.lanczos_b
    }

    pub fn terminal_b(&self) -> f64 {
        self.terminal_b
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Absolute threshold used for `b_k = 0`.
    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    /// Largest `|⟨Q_j|Q_k⟩ − δ_jk|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = gram(&self.basis);
        let k = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { c(1.0) } else { c(0.0) };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Largest `|⟨Q_j|L|Q_k⟩|` with `|j − k| ≥ 2`.
    pub fn tridiagonal_defect<M: OperatorMap>(&self, l: &M) -> f64 {
        let images: Vec<CMatrix> = self.basis.iter().map(|q| l.apply(q)).collect();
        let mut worst: f64 = 0.0;
        for (j, q) in self.basis.iter().enumerate() {
            for (k, lq) in images.iter().enumerate() {
                if j.abs_diff(k) >= 2 {
                    worst = worst.max(linalg::hs_inner(q, lq).norm());
                }
            }
        }
        worst
    }
}

fn inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &CMatrix) -> f64 {
    a.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn orthogonalize(b: &mut CMatrix, against: &[CMatrix]) {
    let overlaps: Vec<Complex64> = against.iter().map(|q| inner(q, b)).collect();
    for (q, ov) in against.iter().zip(overlaps) {
        b.zip_apply(q, |x, y| *x -= ov * y);
    }
}

/// Lanczos recursion with full re-orthogonalization:
///
/// 1. `Q_0 = O/‖O‖`;
/// 2. `B_k = L Q_{k−1}`;
/// 3. subtract the projections of `B_k` on all `Q_0 … Q_{k−1}`;
/// 4. repeat step 3;
/// 5. `b_k = ‖B_k‖`; stop if `b_k ≤ zero_tol · b_1`;
/// 6. `Q_k = B_k / b_k`.
///
/// `b_1` itself is tested against `zero_tol · ‖L‖`.
pub fn lanczos_fo<M: OperatorMap>(l: &M, op: &CMatrix, zero_tol: f64) -> Result<KrylovData> {
    let d = l.hilbert_dim();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: op.nrows() });
    }
    if !(zero_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("zero_tol {zero_tol} must be > 0")));
    }
    let n0 = norm(op);
    if !(n0 > 0.0) {
        return Err(Error::InvalidParameter("initial operator has zero norm".into()));
    }
    let mut basis = vec![op / c(n0)];
    let mut lanczos_b = Vec::new();
    let mut threshold = zero_tol * l.norm_bound().max(f64::MIN_POSITIVE);
    let max_dim = d * d;

    loop {
        let mut b = l.apply(basis.last().expect("basis is non-empty"));
        orthogonalize(&mut b, &basis);
        orthogonalize(&mut b, &basis);
        let bk = norm(&b);
        if bk <= threshold {
            return Ok(KrylovData { basis, lanczos_b, terminal_b: bk, zero_tol: threshold, frame: Frame::Computational });
        }
        if lanczos_b.is_empty() {
            threshold = zero_tol * bk;
        }
        if basis.len() >= max_dim {
            return Err(Error::Numeric(format!("Lanczos did not terminate within {max_dim} steps")));
        }
        lanczos_b.push(bk);
        basis.push(b / c(bk));
    }
}

/// Operator wavefunction on the Krylov chain over a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovProfile {
    pub times: Vec<f64>,
    /// `φ_k(t)`, one vector per time.
    pub amplitudes: Vec<Vec<f64>>,
    pub complexity: Vec<f64>,
    pub entropy: Vec<f64>,
    /// Largest imaginary part of `i^{−k}⟨Q_k|O(t)⟩` over the grid.
    pub max_imag_residue: f64,
}

impl KrylovProfile {
    /// Largest `|Σ_k φ_k² − 1|` over the grid.
    pub fn normalization_defect(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|phi| (phi.iter().map(|p| p * p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `φ_k(t) = i^{−k}⟨Q_k|O(t)⟩` for normalized `O`, with `O(t)` evolved exactly
/// in the eigenbasis of `H`.
pub fn krylov_profile(l: &Liouvillian, op: &CMatrix, data: &KrylovData, times: &[f64]) -> Result<KrylovProfile> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("profile times must be finite".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("profile times must be sorted".into()));
    }
    let d = l.hilbert_dim();
    if op.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, got: op.nrows() });
    }
    let v = &l.eigen().vectors;
    let energies = &l.eigen().values;
    let o_eig = l.to_eigen_frame(&(op / c(norm(op))));
    let q_eig: Cow<'_, [CMatrix]> = match data.frame {
        Frame::Eigen => Cow::Borrowed(data.basis()),
        Frame::Computational => Cow::Owned(data.basis().iter().map(|q| v.adjoint() * q * v).collect()),
    };
    let phase_k: Vec<Complex64> = (0..q_eig.len()).map(|k| Complex64::i().powi(-(k as i32))).collect();

    let mut amplitudes = Vec::with_capacity(times.len());
    let mut complexity = Vec::with_capacity(times.len());
    let mut entropy = Vec::with_capacity(times.len());
    let mut max_imag: f64 = 0.0;
    for &t in times {
        let phases: Vec<Complex64> = energies.iter().map(|e| Complex64::from_polar(1.0, e * t)).collect();
        let o_t = CMatrix::from_fn(d, d, |i, j| o_eig[(i, j)] * phases[i] * phases[j].conj());
        let phi: Vec<f64> = q_eig
            .iter()
            .zip(&phase_k)
            .map(|(q, ph)| {
                let z = ph * inner(q, &o_t);
                max_imag = max_imag.max(z.im.abs());
                z.re
            })
            .collect();
        complexity.push(krylov_complexity(&phi));
        entropy.push(krylov_entropy(&phi));
        amplitudes.push(phi);
    }
    Ok(KrylovProfile { times: times.to_vec(), amplitudes, complexity, entropy, max_imag_residue: max_imag })
}

/// `C_K = Σ_k k φ_k²`.
pub fn krylov_complexity(phi: &[f64]) -> f64 {
    phi.iter().enumerate().map(|(k, p)| k as f64 * p * p).sum()
}

/// `S_K = −Σ_k φ_k² ln φ_k²`.
pub fn krylov_entropy(phi: &[f64]) -> f64 {
    phi.iter()
        .map(|p| p * p)
        .filter(|&w| w > 0.0)
        .map(|w| -w * w.ln())
        .sum()
}

/// Geometric grid on `[t_min, t_switch]` followed by a linear grid up to
/// `t_max`, with `t = 0` prepended.
pub fn time_grid(t_min: f64, t_switch: f64, t_max: f64, n_geom: usize, n_lin: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_switch > t_min && t_max > t_switch) {
        return Err(Error::InvalidParameter(format!(
            "time grid needs 0 < t_min < t_switch < t_max, got {t_min}, {t_switch}, {t_max}"
        )));
    }
    let mut out = vec![0.0];
    let ratio = (t_switch / t_min).ln();
    for i in 0..n_geom {
        let f = if n_geom > 1 { i as f64 / (n_geom - 1) as f64 } else { 0.0 };
        out.push(t_min * (ratio * f).exp());
    }
    for i in 1..=n_lin {
        out.push(t_switch + (t_max - t_switch) * i as f64 / n_lin as f64);
    }
    out.dedup();
    Ok(out)
}

/// `⟨A_i|A_j⟩` for a list of operators.
pub fn gram(ops: &[CMatrix]) -> CMatrix {
    if ops.is_empty() {
        return CMatrix::zeros(0, 0);
    }
    let len = ops[0].len();
    let stacked = CMatrix::from_fn(len, ops.len(), |r, k| ops[k].as_slice()[r]);
    linalg::complex_gram(&stacked)
}

/// Numerical rank of the span of a list of operators.
///
/// Uses the smaller of the `m×m` Gram matrix and the `d²×d²` frame operator
/// `Σ |A_k⟩⟨A_k|`; both share the nonzero spectrum.
pub fn span_rank_oracle(ops: &[CMatrix]) -> Result<usize> {
    if ops.is_empty() {
        return Ok(0);
    }
    let len = ops[0].len();
    if ops.iter().any(|o| o.len() != len) {
        return Err(Error::DimensionMismatch { expected: len, got: ops.iter().map(|o| o.len()).find(|&l| l != len).unwrap_or(0) });
    }
    let g = if ops.len() <= len {
        gram(ops)
    } else {
        // rows of the frame operator = conjugated operators
        let stacked = CMatrix::from_fn(ops.len(), len, |k, r| ops[k].as_slice()[r]);
        linalg::complex_gram(&stacked)
    };
    let eig = linalg::hermitian_eigenvalues_desc(&g)?;
    Ok(linalg::numerical_rank(&eig, RANK_THRESHOLD))
}

/// Dimension of the Krylov space `span{Lᵏ O}` sampled through the exact
/// evolution: `O(t_m) = e^{iHt_m} O e^{−iHt_m}` at `samples` random times in
/// `[0, t_max]`. Monomials `Lᵏ O` lose precision quickly with `k`; the orbit
/// spans the same space whenever `samples ≥ K`.
pub fn orbit_rank_oracle(l: &Liouvillian, op: &CMatrix, samples: usize, t_max: f64, seed: u64) -> Result<usize> {
    let mut r = rng::seeded(seed);
    let n0 = norm(op);
    if !(n0 > 0.0) {
        return Err(Error::InvalidParameter("initial operator has zero norm".into()));
    }
    let o = op / c(n0);
    let mut ops = vec![o.clone()];
    for _ in 1..samples {
        let t: f64 = r.random::<f64>() * t_max;
        ops.push(l.evolve(&o, t));
    }
    span_rank_oracle(&ops)
}

/// `{O, L O, …, L^k O}`, each rescaled to unit norm.
pub fn krylov_powers<M: OperatorMap>(l: &M, op: &CMatrix, k: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(k + 1);
    let mut cur = op.clone();
    for _ in 0..=k {
        let n = norm(&cur);
        if n > 0.0 {
            cur /= c(n);
        }
        out.push(cur.clone());
        cur = l.apply(&cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{self, Axis};

    fn pauli(a: Axis) -> CMatrix {
        a.pauli()
    }

    #[test]
    fn liouvillian_commutator() {
        let l = liouvillian(&pauli(Axis::X)).unwrap();
        let out = l.apply(&pauli(Axis::Z));
        let expected = pauli(Axis::Y) * Complex64::new(0.0, -2.0);
        assert!(linalg::max_abs(&(out - expected)) < 1e-14);
        let dense = l.to_superoperator();
        let via_dense = dense.apply(&pauli(Axis::Z));
        assert!(linalg::max_abs(&(via_dense - l.apply(&pauli(Axis::Z)))) < 1e-14);
        let zero = liouvillian(&CMatrix::identity(4, 4)).unwrap().to_superoperator();
        assert!(linalg::max_abs(zero.matrix()) < 1e-15);
        assert!(liouvillian(&(pauli(Axis::X) * Complex64::i())).is_err());
    }

    #[test]
    fn liouvillian_spectrum_is_energy_differences() {
        let mut r = rng::seeded(5);
        let h = models::goe_sample_with(2, &mut r).unwrap();
        let l = liouvillian(&h).unwrap();
        let e = &l.eigen().values;
        let mut diffs: Vec<f64> = e.iter().flat_map(|a| e.iter().map(move |b| a - b)).collect();
        diffs.sort_by(f64::total_cmp);
        let mut spec = linalg::hermitian_eigenvalues_desc(l.to_superoperator().matrix()).unwrap();
        spec.sort_by(f64::total_cmp);
        for (a, b) in diffs.iter().zip(&spec) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn pauli_chain() {
        let l = liouvillian(&pauli(Axis::X)).unwrap();
        let data = lanczos_fo(&l, &pauli(Axis::Z), DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(data.dim(), 2);
        assert!((data.lanczos_b()[0] - 2.0).abs() < 1e-14);
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let prof = krylov_profile(&l, &pauli(Axis::Z), &data, &times).unwrap();
        for (t, phi) in times.iter().zip(&prof.amplitudes) {
            assert!((phi[0] - (2.0 * t).cos()).abs() < 1e-12);
            assert!((phi[1] - (2.0 * t).sin()).abs() < 1e-12);
        }
        assert!(prof.max_imag_residue < 1e-12);
        assert!(prof.normalization_defect() < 1e-12);
        assert!(prof.complexity[0].abs() < 1e-12);
        assert!(prof.entropy[0].abs() < 1e-12);
    }

    #[test]
    fn conserved_operator_has_trivial_chain() {
        let h = pauli(Axis::X) + pauli(Axis::Z) * c(0.3);
        let l = liouvillian(&h).unwrap();
        let data = lanczos_fo(&l, &h, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(data.dim(), 1);
        assert!(data.lanczos_b().is_empty());
    }

    #[test]
    fn complexity_entropy_uniform() {
        let k = 7;
        let phi = vec![(1.0 / k as f64).sqrt(); k];
        assert!((krylov_complexity(&phi) - (k as f64 - 1.0) / 2.0).abs() < 1e-13);
        assert!((krylov_entropy(&phi) - (k as f64).ln()).abs() < 1e-13);
    }

    #[test]
    fn oracle_trivial() {
        let o = pauli(Axis::Y);
        assert_eq!(span_rank_oracle(&[o.clone(), o.clone(), o]).unwrap(), 1);
        assert_eq!(span_rank_oracle(&[]).unwrap(), 0);
        let many: Vec<CMatrix> = (0..10).map(|k| pauli(Axis::X) * c(k as f64 + 1.0) + pauli(Axis::Z)).collect();
        assert_eq!(span_rank_oracle(&many).unwrap(), 2);
    }

    #[test]
    fn time_grid_shape() {
        let g = time_grid(0.01, 1.0, 10.0, 5, 9).unwrap();
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 0.01).abs() < 1e-15);
        assert!((g[5] - 1.0).abs() < 1e-12);
        assert!((g.last().unwrap() - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(time_grid(1.0, 0.5, 2.0, 3, 3).is_err());
    }
}
