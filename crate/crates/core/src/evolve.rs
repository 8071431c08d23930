//! Heisenberg time series of an observable and the inverse covariance
//! matrix `C⁻¹ = ÕᵀÕ` of the resulting measurement record.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, SymmetricEigen};
use crate::opspace::{self, OperatorBasis};

/// Relative eigenvalue threshold for numerical rank: `λ > 1e−10 · max λ`.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Unitarity defect above which the propagator is re-polished before use.
pub const POLISH_THRESHOLD: f64 = 1e-13;

/// Unitarity defect the propagator may carry at most (`‖U†U − I‖_max`).
pub const DRIFT_LIMIT: f64 = 1e-9;

pub fn default_max_steps(d: usize) -> usize {
    10 * d * d
}

pub fn default_horizon(d: usize) -> usize {
    2 * d * d
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesOptions {
    /// Upper limit on the number of records; `None` means `10·d²`.
    pub max_steps: Option<usize>,
    /// Whether the unevolved observable `O_0 = O` is the first record.
    pub include_initial: bool,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { max_steps: None, include_initial: true }
    }
}

/// Iterator over `O_n = U†ⁿ O Uⁿ`, computed by repeated conjugation.
#[derive(Clone, Debug)]
pub struct HeisenbergSteps {
    u: CMatrix,
    u_dag: CMatrix,
    current: CMatrix,
    remaining: usize,
}

impl HeisenbergSteps {
    pub fn new(u: &CMatrix, op: &CMatrix, records: usize, opts: SeriesOptions) -> Result<Self> {
        let d = u.nrows();
        if op.nrows() != d || op.ncols() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: op.nrows() });
        }
        if records == 0 {
            return Err(Error::InvalidParameter("series needs at least one record".into()));
        }
        let max = opts.max_steps.unwrap_or_else(|| default_max_steps(d));
        if records > max {
            return Err(Error::HorizonTooLong { requested: records, max });
        }
        let defect = linalg::unitarity_defect(u);
        if defect > DRIFT_LIMIT {
            return Err(Error::NotUnitary(defect));
        }
        let u = if defect > POLISH_THRESHOLD { linalg::polish_unitary(u) } else { u.clone() };
        let u_dag = u.adjoint();
        let mut current = linalg::hermitian_part(op);
        if !opts.include_initial {
            current = linalg::hermitian_part(&(&u_dag * &current * &u));
        }
        Ok(Self { u, u_dag, current, remaining: records })
    }
}

impl Iterator for HeisenbergSteps {
    type Item = CMatrix;

    fn next(&mut self) -> Option<CMatrix> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let next = if self.remaining > 0 {
            linalg::hermitian_part(&(&self.u_dag * &self.current * &self.u))
        } else {
            self.current.clone()
        };
        Some(std::mem::replace(&mut self.current, next))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

/// Evolved operators together with the measurement matrix
/// `Õ[n, α] = Tr(O_n E_α)`.
#[derive(Clone, Debug)]
pub struct ObservableSeries {
    operators: Vec<CMatrix>,
    measurement: DMatrix<f64>,
    traces: Vec<f64>,
    basis: OperatorBasis,
}

impl ObservableSeries {
    pub fn from_operators(operators: Vec<CMatrix>, basis: &OperatorBasis) -> Result<Self> {
        let d = basis.dim_hilbert();
        if operators.is_empty() {
            return Err(Error::InvalidParameter("series needs at least one record".into()));
        }
        let mut measurement = DMatrix::zeros(operators.len(), basis.len());
        let mut row = vec![0.0; basis.len()];
        let mut traces = Vec::with_capacity(operators.len());
        for (n, op) in operators.iter().enumerate() {
            if op.nrows() != d {
                return Err(Error::DimensionMismatch { expected: d, got: op.nrows() });
            }
            basis.coefficients_into(op, &mut row);
            for (alpha, &x) in row.iter().enumerate() {
                measurement[(n, alpha)] = x;
            }
            traces.push(linalg::trace(op).re);
        }
        Ok(Self { operators, measurement, traces, basis: basis.clone() })
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// `N × (d²−1)`.
    pub fn measurement(&self) -> &DMatrix<f64> {
        &self.measurement
    }

    /// `Tr(O_n)` per record.
    pub fn traces(&self) -> &[f64] {
        &self.traces
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }
}

pub fn heisenberg_series(u: &CMatrix, op: &CMatrix, records: usize, basis: &OperatorBasis) -> Result<ObservableSeries> {
    heisenberg_series_with(u, op, records, basis, SeriesOptions::default())
}

pub fn heisenberg_series_with(
    u: &CMatrix,
    op: &CMatrix,
    records: usize,
    basis: &OperatorBasis,
    opts: SeriesOptions,
) -> Result<ObservableSeries> {
    let ops: Vec<_> = HeisenbergSteps::new(u, op, records, opts)?.collect();
    ObservableSeries::from_operators(ops, basis)
}

/// `C⁻¹ = ÕᵀÕ` with its eigendecomposition (eigenvalues descending).
#[derive(Clone, Debug)]
pub struct InverseCovariance {
    matrix: DMatrix<f64>,
    eigen: SymmetricEigen,
    n_records: usize,
}

impl InverseCovariance {
    pub fn from_gram(matrix: DMatrix<f64>, n_records: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let eigen = SymmetricEigen::new(&matrix)?;
        Ok(Self { matrix, eigen, n_records })
    }

    pub fn from_measurement(measurement: &DMatrix<f64>) -> Result<Self> {
        let mut gram = DMatrix::zeros(measurement.ncols(), measurement.ncols());
        linalg::accumulate_gram(&mut gram, measurement);
        Self::from_gram(gram, measurement.nrows())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }

    /// Descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    /// Orthonormal columns matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigen.vectors
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn rank(&self) -> usize {
        linalg::numerical_rank(&self.eigen.values, RANK_THRESHOLD)
    }

    /// Eigenvectors spanning the measured subspace (above the rank threshold).
    pub fn measured_subspace(&self) -> DMatrix<f64> {
        self.eigen.vectors.columns(0, self.rank()).into_owned()
    }

    /// Moore–Penrose solve `C b` with `C = (C⁻¹)⁺`, dropping directions
    /// below the rank threshold.
    pub fn pseudo_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let k = self.rank();
        let v = self.eigen.vectors.columns(0, k);
        let mut coeffs = v.tr_mul(rhs);
        for (i, x) in coeffs.iter_mut().enumerate() {
            *x /= self.eigen.values[i];
        }
        v * coeffs
    }
}

pub fn inv_covariance(series: &ObservableSeries) -> Result<InverseCovariance> {
    InverseCovariance::from_measurement(series.measurement())
}

/// Incremental `ÕᵀÕ`. Rows are buffered and folded in as blocked Gram
/// updates when a snapshot is taken or the buffer fills.
#[derive(Clone, Debug)]
pub struct CovarianceAccumulator {
    dim: usize,
    gram: DMatrix<f64>,
    pending: Vec<f64>,
    pending_rows: usize,
    block: usize,
    n_records: usize,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        Self::with_block(dim, 256)
    }

    pub fn with_block(dim: usize, block: usize) -> Self {
        Self {
            dim,
            gram: DMatrix::zeros(dim, dim),
            pending: Vec::with_capacity(dim * block),
            pending_rows: 0,
            block: block.max(1),
            n_records: 0,
        }
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        self.pending.extend_from_slice(row);
        self.pending_rows += 1;
        self.n_records += 1;
        if self.pending_rows >= self.block {
            self.flush();
        }
        Ok(())
    }

    pub fn push_operator(&mut self, op: &CMatrix, basis: &OperatorBasis) -> Result<DVector<f64>> {
        let row = basis.coefficients(op);
        self.push_row(row.as_slice())?;
        Ok(row)
    }

    fn flush(&mut self) {
        if self.pending_rows == 0 {
            return;
        }
        let rows = DMatrix::from_row_slice(self.pending_rows, self.dim, &self.pending);
        linalg::accumulate_gram(&mut self.gram, &rows);
        self.pending.clear();
        self.pending_rows = 0;
    }

    pub fn gram(&mut self) -> &DMatrix<f64> {
        self.flush();
        &self.gram
    }

    pub fn snapshot(&mut self) -> Result<InverseCovariance> {
        self.flush();
        InverseCovariance::from_gram(self.gram.clone(), self.n_records)
    }
}

/// `‖O‖² = Σ_α Tr(O E_α)²`, the squared norm of each measurement row.
pub fn observable_norm_sqr(op: &CMatrix) -> f64 {
    opspace::traceless_norm_sqr(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::span_rank_oracle;
    use crate::models::{self, Axis, IsingParams};
    use crate::opspace::{adjoint_superoperator, build_basis, OperatorMap};
    use proptest::prelude::*;

    fn chaotic_u(sites: usize) -> CMatrix {
        models::tki_floquet(&IsingParams::new(sites, 1.0, 1.4, 1.4, true)).unwrap()
    }

    #[test]
    fn identity_evolution_repeats_observable() {
        let basis = build_basis(4).unwrap();
        let o = models::site_observable(Axis::Y, 1, 2).unwrap().matrix;
        let s = heisenberg_series(&CMatrix::identity(4, 4), &o, 5, &basis).unwrap();
        assert!(s.operators().iter().all(|x| x == &o));
        let ic = inv_covariance(&s).unwrap();
        assert_eq!(ic.rank(), 1);
        let norm = observable_norm_sqr(&o);
        assert!((ic.eigenvalues()[0] - 5.0 * norm).abs() < 1e-12);
    }

    #[test]
    fn commuting_evolution_keeps_sigma_z() {
        let u = models::tki_floquet(&IsingParams::new(3, 1.0, 0.0, 0.0, true)).unwrap();
        let z = models::embed_site(&Axis::Z.pauli(), 1, 3);
        let basis = build_basis(8).unwrap();
        let s = heisenberg_series(&u, &z, 6, &basis).unwrap();
        for op in s.operators() {
            assert!(linalg::max_abs(&(op - &z)) < 1e-13);
        }
    }

    #[test]
    fn chaotic_two_site_span_is_thirteen() {
        let basis = build_basis(4).unwrap();
        let o = models::site_observable(Axis::Y, 1, 2).unwrap().matrix;
        let s = heisenberg_series(&chaotic_u(2), &o, 100, &basis).unwrap();
        assert_eq!(inv_covariance(&s).unwrap().rank(), 13);
        assert_eq!(span_rank_oracle(s.operators()).unwrap(), 13);
    }

    #[test]
    fn single_normalized_record() {
        let basis = build_basis(2).unwrap();
        let o = basis.matrix(2);
        let s = heisenberg_series(&CMatrix::identity(2, 2), &o, 1, &basis).unwrap();
        let ic = inv_covariance(&s).unwrap();
        assert!((ic.eigenvalues()[0] - 1.0).abs() < 1e-14);
        assert_eq!(ic.rank(), 1);
    }

    #[test]
    fn measurement_rows_have_constant_norm() {
        let basis = build_basis(8).unwrap();
        let o = models::collective_observable(Axis::X, 3).unwrap().matrix;
        let s = heisenberg_series(&chaotic_u(3), &o, 40, &basis).unwrap();
        let expected = linalg::hs_norm_sqr(&o) - linalg::trace(&o).norm_sqr() / 8.0;
        for n in 0..s.len() {
            let row_norm = s.measurement().row(n).norm_squared();
            assert!((row_norm - expected).abs() < 1e-10);
            assert!(linalg::hermiticity_defect(&s.operators()[n]) < 1e-10);
        }
    }

    #[test]
    fn trace_law() {
        let basis = build_basis(8).unwrap();
        let o = models::site_observable(Axis::Y, 1, 3).unwrap().matrix;
        let norm = observable_norm_sqr(&o);
        let mut acc = CovarianceAccumulator::with_block(basis.len(), 7);
        for (n, op) in HeisenbergSteps::new(&chaotic_u(3), &o, 128, SeriesOptions::default()).unwrap().enumerate() {
            acc.push_operator(&op, &basis).unwrap();
            let tr = acc.gram().trace();
            let expected = (n + 1) as f64 * norm;
            assert!(((tr - expected) / expected).abs() < 1e-8);
        }
    }

    #[test]
    fn accumulator_matches_batch() {
        let basis = build_basis(8).unwrap();
        let o = models::site_observable(Axis::Y, 2, 3).unwrap().matrix;
        let s = heisenberg_series(&chaotic_u(3), &o, 50, &basis).unwrap();
        let batch = inv_covariance(&s).unwrap();
        let mut acc = CovarianceAccumulator::with_block(basis.len(), 16);
        for op in s.operators() {
            acc.push_operator(op, &basis).unwrap();
        }
        let inc = acc.snapshot().unwrap();
        assert_eq!(inc.n_records(), 50);
        assert!(linalg::max_abs_real(&(inc.matrix() - batch.matrix())) < 1e-10);
    }

    #[test]
    fn horizon_and_input_validation() {
        let basis = build_basis(2).unwrap();
        let o = basis.matrix(0);
        let id = CMatrix::identity(2, 2);
        assert!(matches!(
            heisenberg_series(&id, &o, 41, &basis),
            Err(Error::HorizonTooLong { requested: 41, max: 40 })
        ));
        assert!(heisenberg_series(&id, &o, 0, &basis).is_err());
        let bad = id.clone() * linalg::c(1.01);
        assert!(matches!(heisenberg_series(&bad, &o, 3, &basis), Err(Error::NotUnitary(_))));
        let opts = SeriesOptions { max_steps: Some(1000), include_initial: true };
        assert_eq!(heisenberg_series_with(&id, &o, 100, &basis, opts).unwrap().len(), 100);
    }

    #[test]
    fn skipping_initial_record_shifts_series() {
        let basis = build_basis(4).unwrap();
        let u = chaotic_u(2);
        let o = models::site_observable(Axis::Y, 1, 2).unwrap().matrix;
        let with = heisenberg_series(&u, &o, 4, &basis).unwrap();
        let opts = SeriesOptions { include_initial: false, ..Default::default() };
        let without = heisenberg_series_with(&u, &o, 3, &basis, opts).unwrap();
        for k in 0..3 {
            assert!(linalg::max_abs(&(&with.operators()[k + 1] - &without.operators()[k])) < 1e-13);
        }
    }

    #[test]
    fn superoperator_powers_agree_with_conjugation() {
        for sites in [2usize, 3, 4] {
            let d = 1 << sites;
            let basis = build_basis(d).unwrap();
            let u = chaotic_u(sites);
            let o = models::site_observable(Axis::Y, 1, sites).unwrap().matrix;
            let s = heisenberg_series(&u, &o, 50, &basis).unwrap();
            let sup = adjoint_superoperator(&u).unwrap();
            let mut x = o.clone();
            for op in s.operators() {
                assert!(linalg::max_abs(&(op - &x)) < 1e-9);
                x = sup.apply(&x);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn rank_bound_and_weyl_monotonicity(hx in 0.0f64..2.0, hz in 0.0f64..2.0, site in 1usize..=3, n in 5usize..60) {
            let basis = build_basis(8).unwrap();
            let u = models::tki_floquet(&IsingParams::new(3, 1.0, hx, hz, true)).unwrap();
            let o = models::site_observable(Axis::Y, site, 3).unwrap().matrix;
            let s = heisenberg_series(&u, &o, n + 1, &basis).unwrap();
            let head = InverseCovariance::from_measurement(&s.measurement().rows(0, n).into_owned()).unwrap();
            let full = inv_covariance(&s).unwrap();
            prop_assert!(full.rank() <= 8 * 8 - 8 + 1);
            for (after, before) in full.eigenvalues().iter().zip(head.eigenvalues()) {
                prop_assert!(after + 1e-9 >= *before);
            }
            let min = *full.eigenvalues().last().unwrap();
            prop_assert!(min >= -1e-10 * full.eigenvalues()[0]);
        }
    }
}
