//! Weak-measurement tomography: simulated records, the least-squares
//! (maximum-likelihood) Bloch estimate and the positivity-constrained
//! projection onto physical states.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::evolve::{inv_covariance, InverseCovariance, ObservableSeries};
use crate::linalg::{c, CMatrix, CVector, HermitianEigen};
use crate::metrics;
use crate::models::standard_normal;
use crate::opspace::{self, BlochVector, OperatorBasis};
use crate::rng;

/// Haar-random pure state: a normalized complex Gaussian vector.
pub fn sample_haar_state_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CVector> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let v = CVector::from_fn(d, |_, _| Complex64::new(standard_normal(rng), standard_normal(rng)));
    let norm = v.norm();
    Ok(v / c(norm))
}

pub fn sample_haar_state(d: usize, seed: u64) -> Result<CVector> {
    sample_haar_state_with(d, &mut rng::seeded(seed))
}

/// `M_n = Tr(O_n ρ₀) + W_n`, `W_n ~ N(0, σ²)` i.i.d.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub values: Vec<f64>,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

pub fn measurement_record(series: &ObservableSeries, rho0: &CMatrix, sigma: f64, seed: u64) -> Result<MeasurementRecord> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sigma {sigma} must be finite and >= 0")));
    }
    opspace::bloch_from_density(rho0, series.basis())?;
    let mut values: Vec<f64> = series
        .operators()
        .iter()
        .map(|op| trace_product(op, rho0))
        .collect();
    if sigma > 0.0 {
        add_noise(&mut values, sigma, seed);
    }
    Ok(MeasurementRecord { values, noise_sigma: sigma, rng_seed: seed })
}

/// Adds i.i.d. `N(0, σ²)` noise from the stream `seed`.
pub fn add_noise(values: &mut [f64], sigma: f64, seed: u64) {
    let normal = Normal::new(0.0, sigma).expect("sigma validated by caller");
    let mut r = rng::seeded(seed);
    for v in values.iter_mut() {
        *v += normal.sample(&mut r);
    }
}

/// `Õᵀ (M − Tr(O_n)/d)`, the data side of the normal equations.
pub fn projected_record(series: &ObservableSeries, record: &MeasurementRecord) -> Result<DVector<f64>> {
    if record.values.len() != series.len() {
        return Err(Error::DimensionMismatch { expected: series.len(), got: record.values.len() });
    }
    let d = series.basis().dim_hilbert() as f64;
    let centered = DVector::from_iterator(
        series.len(),
        record.values.iter().zip(series.traces()).map(|(m, tr)| m - tr / d),
    );
    Ok(series.measurement().tr_mul(&centered))
}

/// Least-squares estimate `r_ML = C Õᵀ M` with the pseudoinverse; components
/// outside the measured subspace are zero.
pub fn ml_estimate(series: &ObservableSeries, record: &MeasurementRecord) -> Result<BlochVector> {
    let invcov = inv_covariance(series)?;
    Ok(ml_estimate_from(&invcov, &projected_record(series, record)?))
}

pub fn ml_estimate_from(invcov: &InverseCovariance, projected: &DVector<f64>) -> BlochVector {
    BlochVector(invcov.pseudo_solve(projected))
}

/// Euclidean (= Hilbert–Schmidt) projection of `I/d + Σ x_α E_α` onto the
/// density matrices. Returns the projected Bloch coordinates.
pub fn project_to_states(x: &[f64], basis: &OperatorBasis) -> Vec<f64> {
    let rho = opspace::density_from_bloch(&BlochVector(DVector::from_column_slice(x)), basis)
        .expect("length checked by caller");
    let eig = HermitianEigen::new(&rho);
    if eig.values[0] >= 0.0 {
        return x.to_vec();
    }
    let clipped = simplex_projection(&eig.values);
    let weights: Vec<Complex64> = clipped.into_iter().map(c).collect();
    let projected = eig.with_weights(&weights);
    basis.coefficients(&projected).as_slice().to_vec()
}

/// Euclidean projection of a vector onto the probability simplex.
pub fn simplex_projection(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

pub fn min_eigenvalue(r: &BlochVector, basis: &OperatorBasis) -> f64 {
    let rho = opspace::density_from_bloch(r, basis).expect("length checked by caller");
    HermitianEigen::new(&rho).values[0]
}

/// Solver settings for [`positivity_projection`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionOptions {
    /// Weight regularization `ε = epsilon_rel · Tr(C⁻¹)/(d²−1)`.
    pub epsilon_rel: f64,
    /// Absolute `ε`, overriding `epsilon_rel`.
    pub epsilon: Option<f64>,
    pub max_iter: usize,
    /// Relative residual tolerance.
    pub tol: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self { epsilon_rel: metrics::DEFAULT_EPSILON_REL, epsilon: None, max_iter: 5000, tol: 1e-10 }
    }
}

impl ProjectionOptions {
    pub fn epsilon_for(&self, invcov: &InverseCovariance) -> f64 {
        self.epsilon.unwrap_or_else(|| metrics::regularization_epsilon(invcov, self.epsilon_rel))
    }
}

/// Output of the constrained projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub r_bar: BlochVector,
    /// `(r_ML − r̄)ᵀ W (r_ML − r̄)` with `W = C⁻¹ + εI`.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub min_eigenvalue: f64,
}

/// `W = C⁻¹ + εI` split into the measured eigen-directions of `C⁻¹` (above
/// the rank threshold) and their complement, where the weight is exactly `ε`.
/// Every product then costs `O(rank · dim)` instead of `O(dim²)`.
struct Weighted {
    measured: DMatrix<f64>,
    excess: Vec<f64>,
    epsilon: f64,
    target: DVector<f64>,
    target_hat: DVector<f64>,
}

impl Weighted {
    fn new(invcov: &InverseCovariance, r_ml: &BlochVector, epsilon: f64) -> Self {
        let measured = invcov.measured_subspace();
        let excess = invcov.eigenvalues()[..measured.ncols()].to_vec();
        let target_hat = measured.tr_mul(&r_ml.0);
        Self { measured, excess, epsilon, target: r_ml.0.clone(), target_hat }
    }

    fn max_weight(&self) -> f64 {
        self.excess.first().copied().unwrap_or(0.0) + self.epsilon
    }

    fn objective(&self, r: &DVector<f64>) -> f64 {
        let diff = r - &self.target;
        let hat = self.measured.tr_mul(&diff);
        self.epsilon * diff.norm_squared() + hat.iter().zip(&self.excess).map(|(h, l)| l * h * h).sum::<f64>()
    }

    /// `argmin_x (x − r_ML)ᵀ W (x − r_ML) + (ρ/2)‖x − v‖²`, i.e.
    /// `(2W + ρI) x = 2W r_ML + ρ v`.
    fn prox(&self, v: &DVector<f64>, penalty: f64) -> DVector<f64> {
        let e2 = 2.0 * self.epsilon;
        let (a, b) = (e2 / (e2 + penalty), penalty / (e2 + penalty));
        let v_hat = self.measured.tr_mul(v);
        let correction = DVector::from_iterator(
            v_hat.len(),
            (0..v_hat.len()).map(|i| {
                let wi = 2.0 * (self.excess[i] + self.epsilon);
                (wi * self.target_hat[i] + penalty * v_hat[i]) / (wi + penalty) - a * self.target_hat[i] - b * v_hat[i]
            }),
        );
        &self.target * a + v * b + &self.measured * correction
    }
}

/// Weighted objective `(a − b)ᵀ (C⁻¹ + εI) (a − b)`; eigen-directions of
/// `C⁻¹` below the rank threshold count as unmeasured.
pub fn weighted_distance(invcov: &InverseCovariance, epsilon: f64, a: &BlochVector, b: &BlochVector) -> f64 {
    Weighted::new(invcov, b, epsilon).objective(&a.0)
}

/// Closest physical state to `r_ML` in the metric `W = C⁻¹ + εI`:
/// minimizes `(r_ML − r̄)ᵀ W (r_ML − r̄)` subject to `I/d + Σ r̄_α E_α ⪰ 0`.
///
/// Douglas–Rachford splitting between the quadratic (solved exactly in the
/// eigenbasis of `C⁻¹`) and the state set (projected by eigenvalue
/// truncation onto the simplex), with safeguarded Anderson acceleration of
/// the fixed-point map.
pub fn positivity_projection(
    r_ml: &BlochVector,
    invcov: &InverseCovariance,
    basis: &OperatorBasis,
    opts: &ProjectionOptions,
) -> Result<Projection> {
    let start = project_to_states(r_ml.0.as_slice(), basis);
    solve_projection(r_ml, invcov, basis, opts, DVector::from_vec(start), 1.0)
}

/// Same problem from the maximally mixed state with a different initial
/// penalty; agreement with [`positivity_projection`] certifies the optimum.
pub fn positivity_projection_restart(
    r_ml: &BlochVector,
    invcov: &InverseCovariance,
    basis: &OperatorBasis,
    opts: &ProjectionOptions,
) -> Result<Projection> {
    solve_projection(r_ml, invcov, basis, opts, DVector::zeros(basis.len()), 0.3)
}

const ANDERSON_MEMORY: usize = 10;
/// Penalties of the two solver instances: one suited to records that pin
/// the state (`∝ max W`), one to under-determined records (`∝ ε`).
const PENALTY_DETERMINED: f64 = 0.05;
const PENALTY_UNDERDETERMINED: f64 = 10.0;
const FIRST_ROUND: usize = 100;

/// Type-II Anderson mixing for a fixed-point map `v ↦ v + g(v)`.
struct Anderson {
    dv: Vec<DVector<f64>>,
    dg: Vec<DVector<f64>>,
    last: Option<(DVector<f64>, DVector<f64>)>,
}

impl Anderson {
    fn new() -> Self {
        Self { dv: Vec::new(), dg: Vec::new(), last: None }
    }

    fn reset(&mut self) {
        self.dv.clear();
        self.dg.clear();
        self.last = None;
    }

    /// Next iterate from the current point and its residual.
    fn next(&mut self, v: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        if let Some((pv, pg)) = self.last.take() {
            if self.dv.len() == ANDERSON_MEMORY {
                self.dv.remove(0);
                self.dg.remove(0);
            }
            self.dv.push(v - pv);
            self.dg.push(g - pg);
        }
        self.last = Some((v.clone(), g.clone()));
        let plain = v + g;
        if self.dg.is_empty() {
            return plain;
        }
        let m = self.dg.len();
        let dg = DMatrix::from_columns(&self.dg);
        let gram = dg.tr_mul(&dg);
        let ridge = 1e-12 * gram.trace().max(f64::MIN_POSITIVE);
        let Some(chol) = (gram + DMatrix::identity(m, m) * ridge).cholesky() else {
            return plain;
        };
        let gamma = chol.solve(&dg.tr_mul(g));
        let mut out = plain;
        for (j, gj) in gamma.iter().enumerate() {
            out -= (&self.dv[j] + &self.dg[j]) * *gj;
        }
        out
    }
}

/// Douglas–Rachford on `v` at a fixed penalty:
/// `x = prox_f(v)`, `z = P_S(2x − v)`, `v ← v + (z − x)`.
struct Splitting<'a> {
    w: &'a Weighted,
    basis: &'a OperatorBasis,
    penalty: f64,
    v: DVector<f64>,
    x: DVector<f64>,
    z: DVector<f64>,
    mixer: Anderson,
}

impl<'a> Splitting<'a> {
    fn new(w: &'a Weighted, basis: &'a OperatorBasis, penalty: f64, start: DVector<f64>) -> Self {
        let (x, z) = Self::evaluate(w, basis, penalty, &start);
        Self { w, basis, penalty, v: start, x, z, mixer: Anderson::new() }
    }

    fn evaluate(w: &Weighted, basis: &OperatorBasis, penalty: f64, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let x = w.prox(v, penalty);
        let z = DVector::from_vec(project_to_states((&x * 2.0 - v).as_slice(), basis));
        (x, z)
    }

    fn residual(&self) -> f64 {
        (&self.z - &self.x).norm()
    }

    /// Runs up to `budget` iterations; returns the number used and whether
    /// the fixed-point residual fell below `threshold`.
    fn run(&mut self, budget: usize, threshold: f64) -> (usize, bool) {
        for used in 0..budget {
            let g = &self.z - &self.x;
            let res = g.norm();
            if res <= threshold {
                return (used, true);
            }
            let candidate = self.mixer.next(&self.v, &g);
            let (cx, cz) = Self::evaluate(self.w, self.basis, self.penalty, &candidate);
            if (&cz - &cx).norm() > 2.0 * res {
                // Reject the extrapolation and take the plain step.
                self.mixer.reset();
                self.v += &g;
                (self.x, self.z) = Self::evaluate(self.w, self.basis, self.penalty, &self.v);
            } else {
                self.v = candidate;
                self.x = cx;
                self.z = cz;
            }
        }
        let done = self.residual() <= threshold;
        (budget, done)
    }
}

fn solve_projection(
    r_ml: &BlochVector,
    invcov: &InverseCovariance,
    basis: &OperatorBasis,
    opts: &ProjectionOptions,
    start: DVector<f64>,
    penalty_scale: f64,
) -> Result<Projection> {
    let dim = basis.len();
    if r_ml.len() != dim || invcov.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: r_ml.len().max(invcov.dim()) });
    }
    let epsilon = opts.epsilon_for(invcov);
    if epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!("regularization epsilon {epsilon} must be > 0")));
    }
    let w = Weighted::new(invcov, r_ml, epsilon);

    let ml_min = min_eigenvalue(r_ml, basis);
    if ml_min >= 0.0 {
        return Ok(Projection { r_bar: r_ml.clone(), objective: 0.0, converged: true, iterations: 0, min_eigenvalue: ml_min });
    }

    // The better penalty depends on whether the records already pin the
    // state, which is not known in advance: alternate two instances in
    // rounds of doubling length until one converges.
    let threshold = opts.tol * (1.0 + r_ml.0.norm());
    let mut solvers = [
        Splitting::new(&w, basis, penalty_scale * PENALTY_DETERMINED * w.max_weight(), start.clone()),
        Splitting::new(&w, basis, penalty_scale * PENALTY_UNDERDETERMINED * epsilon, start),
    ];
    let mut iterations = 0;
    let mut round = FIRST_ROUND;
    let mut winner = None;
    'outer: while iterations < opts.max_iter {
        for (i, s) in solvers.iter_mut().enumerate() {
            let budget = round.min(opts.max_iter - iterations);
            let (used, done) = s.run(budget, threshold);
            iterations += used;
            if done {
                winner = Some(i);
                break 'outer;
            }
            if iterations >= opts.max_iter {
                break 'outer;
            }
        }
        round *= 2;
    }
    let converged = winner.is_some();
    let best = winner.unwrap_or_else(|| if solvers[0].residual() <= solvers[1].residual() { 0 } else { 1 });
    let r_bar = BlochVector(solvers[best].z.clone());
    let objective = w.objective(&r_bar.0);
    let min_eig = min_eigenvalue(&r_bar, basis);
    Ok(Projection { r_bar, objective, converged, iterations, min_eigenvalue: min_eig })
}

/// Relative disagreement `|a − b| / max(|a|, |b|)` of two objective values;
/// two exact zeros agree.
pub fn objective_agreement(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `⟨ψ₀|ρ̄|ψ₀⟩`.
pub fn fidelity(rho_bar: &CMatrix, psi0: &CVector) -> f64 {
    (psi0.adjoint() * rho_bar * psi0)[(0, 0)].re
}

/// Full reconstruction of one state.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub r_ml: BlochVector,
    pub r_bar: BlochVector,
    pub fidelity: f64,
    pub hs_distance: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub fn reconstruct(
    r_ml: BlochVector,
    invcov: &InverseCovariance,
    basis: &OperatorBasis,
    psi0: &CVector,
    opts: &ProjectionOptions,
) -> Result<ReconstructionResult> {
    let proj = positivity_projection(&r_ml, invcov, basis, opts)?;
    let rho_bar = opspace::density_from_bloch(&proj.r_bar, basis)?;
    let rho0 = opspace::pure_density(psi0);
    Ok(ReconstructionResult {
        fidelity: fidelity(&rho_bar, psi0),
        hs_distance: metrics::hs_distance(&rho0, &rho_bar),
        r_ml,
        r_bar: proj.r_bar,
        objective: proj.objective,
        converged: proj.converged,
        iterations: proj.iterations,
    })
}

/// Bloch vector of a pure state.
pub fn pure_bloch(psi: &CVector, basis: &OperatorBasis) -> BlochVector {
    BlochVector(basis.coefficients(&opspace::pure_density(psi)))
}

/// `Re Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    a.transpose().iter().zip(b.iter()).map(|(x, y)| x * y).sum::<Complex64>().re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{heisenberg_series_with, SeriesOptions};
    use crate::models::{self, IsingParams};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn chaotic_l2_series(records: usize) -> ObservableSeries {
        let u = models::tki_floquet(&IsingParams::new(2, 1.0, 1.4, 1.4, true)).unwrap();
        let o = models::parse_observable("s1y", 2).unwrap();
        let opts = SeriesOptions { max_steps: Some(records), ..Default::default() };
        heisenberg_series_with(&u, &o.matrix, records, &OperatorBasis::new(4).unwrap(), opts).unwrap()
    }

    #[test]
    fn haar_second_moment() {
        // E|⟨0|ψ⟩|² = 1/d, E|⟨0|ψ⟩|⁴ = 2/(d(d+1))
        let d = 4;
        let mut r = rng::seeded(11);
        let n = 20000;
        let (mut m2, mut m4) = (0.0, 0.0);
        for _ in 0..n {
            let p = sample_haar_state_with(d, &mut r).unwrap()[0].norm_sqr();
            m2 += p;
            m4 += p * p;
        }
        m2 /= n as f64;
        m4 /= n as f64;
        assert!((m2 - 0.25).abs() < 0.01, "{m2}");
        assert!((m4 - 0.1).abs() < 0.01, "{m4}");
        assert!(sample_haar_state(1, 0).is_err());
    }

    #[test]
    fn noise_statistics() {
        let mut v = vec![0.0; 40000];
        add_noise(&mut v, 0.5, 3);
        let (mean, _) = metrics::mean_stderr(&v);
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 0.25).abs() < 0.01, "{var}");
    }

    #[test]
    fn noiseless_record_is_exact_trace() {
        let series = chaotic_l2_series(20);
        let psi = sample_haar_state(4, 5).unwrap();
        let rho = opspace::pure_density(&psi);
        let rec = measurement_record(&series, &rho, 0.0, 0).unwrap();
        for (op, m) in series.operators().iter().zip(&rec.values) {
            let direct = (op * &rho).trace().re;
            assert!((direct - m).abs() < 1e-13);
        }
        assert!(measurement_record(&series, &rho, -1.0, 0).is_err());
    }

    #[test]
    fn ml_recovers_measured_components() {
        let series = chaotic_l2_series(200);
        let invcov = inv_covariance(&series).unwrap();
        assert_eq!(invcov.rank(), 13);
        let basis = series.basis();
        let psi = sample_haar_state(4, 8).unwrap();
        let truth = pure_bloch(&psi, basis);
        let rec = measurement_record(&series, &opspace::pure_density(&psi), 0.0, 0).unwrap();
        let r_ml = ml_estimate(&series, &rec).unwrap();
        let p = invcov.measured_subspace();
        let expected = &p * p.tr_mul(&truth.0);
        assert!((&r_ml.0 - expected).amax() < 1e-8);
    }

    #[test]
    fn projection_onto_bloch_ball() {
        // qubit with isotropic weight: the solution is the radial projection
        let basis = OperatorBasis::new(2).unwrap();
        let invcov = InverseCovariance::from_gram(DMatrix::identity(3, 3), 1).unwrap();
        let psi = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let pure = pure_bloch(&psi, &basis);
        let r_ml = BlochVector(&pure.0 * 2.0);
        let opts = ProjectionOptions { epsilon: Some(1e-12), ..Default::default() };
        let p = positivity_projection(&r_ml, &invcov, &basis, &opts).unwrap();
        assert!(p.converged);
        assert!((&p.r_bar.0 - &pure.0).amax() < 1e-7);
        assert!(p.min_eigenvalue > -1e-9);
        let q = positivity_projection_restart(&r_ml, &invcov, &basis, &opts).unwrap();
        assert!(objective_agreement(p.objective, q.objective) < 1e-7);
    }

    #[test]
    fn physical_estimate_is_returned_unchanged() {
        let basis = OperatorBasis::new(2).unwrap();
        let invcov = InverseCovariance::from_gram(DMatrix::identity(3, 3), 1).unwrap();
        let r = BlochVector(DVector::from_vec(vec![0.1, -0.2, 0.05]));
        let p = positivity_projection(&r, &invcov, &basis, &ProjectionOptions::default()).unwrap();
        assert_eq!(p.r_bar, r);
        assert_eq!(p.objective, 0.0);
        assert_eq!(p.iterations, 0);
    }

    #[test]
    fn projection_beats_random_feasible_points() {
        let series = chaotic_l2_series(200);
        let invcov = inv_covariance(&series).unwrap();
        let basis = series.basis();
        let psi = sample_haar_state(4, 21).unwrap();
        let rec = measurement_record(&series, &opspace::pure_density(&psi), 0.3, 4).unwrap();
        let r_ml = ml_estimate(&series, &rec).unwrap();
        let opts = ProjectionOptions::default();
        let eps = opts.epsilon_for(&invcov);
        let p = positivity_projection(&r_ml, &invcov, basis, &opts).unwrap();
        assert!(p.min_eigenvalue > -1e-9);
        let mut r = rng::seeded(2);
        for _ in 0..100 {
            // random mixed state: Ginibre GG†/Tr
            let g = CMatrix::from_fn(4, 4, |_, _| Complex64::new(standard_normal(&mut r), standard_normal(&mut r)));
            let rho = &g * g.adjoint();
            let rho = &rho / rho.trace();
            let cand = BlochVector(basis.coefficients(&rho));
            assert!(weighted_distance(&invcov, eps, &cand, &r_ml) >= p.objective * (1.0 - 1e-9));
        }
    }

    #[test]
    fn hs_distance_identity() {
        let psi = sample_haar_state(4, 1).unwrap();
        let rho0 = opspace::pure_density(&psi);
        let mut r = rng::seeded(9);
        let g = CMatrix::from_fn(4, 4, |_, _| Complex64::new(standard_normal(&mut r), standard_normal(&mut r)));
        let rho = &g * g.adjoint();
        let rho_bar = &rho / rho.trace();
        let f = fidelity(&rho_bar, &psi);
        let purity = (&rho_bar * &rho_bar).trace().re;
        let hs = metrics::hs_distance(&rho0, &rho_bar);
        assert!((hs - (1.0 + purity - 2.0 * f)).abs() < 1e-12);
    }

    #[test]
    fn null_space_is_invisible_to_measured_weight() {
        let series = chaotic_l2_series(200);
        let invcov = inv_covariance(&series).unwrap();
        let k = invcov.rank();
        let null = invcov.eigenvectors().column(k).into_owned();
        let a = BlochVector(DVector::from_element(15, 0.01));
        let b = BlochVector(&a.0 + &null * 0.05);
        // only the ε·I part of the weight sees the null direction
        let eps = 1e-6;
        let diff = weighted_distance(&invcov, eps, &b, &BlochVector::zeros(15)) - weighted_distance(&invcov, eps, &a, &BlochVector::zeros(15));
        let expected = eps * ((&b.0).norm_squared() - (&a.0).norm_squared());
        assert!((diff - expected).abs() < 1e-12 * (1.0 + invcov.trace()));
    }

    #[test]
    fn agreement_of_zero_objectives() {
        assert_eq!(objective_agreement(0.0, 0.0), 0.0);
        assert!((objective_agreement(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn simplex_projection_is_feasible(v in proptest::collection::vec(-3.0f64..3.0, 1..12)) {
            let p = simplex_projection(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // optimality: p minimizes distance among simplex vertices and uniform point
            let dist = |q: &[f64]| q.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let n = v.len();
            let uniform = vec![1.0 / n as f64; n];
            prop_assert!(dist(&p) <= dist(&uniform) + 1e-12);
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                prop_assert!(dist(&p) <= dist(&e) + 1e-12);
            }
        }

        #[test]
        fn state_projection_is_idempotent(seed in 0u64..200) {
            let basis = OperatorBasis::new(3).unwrap();
            let mut r = rng::seeded(seed);
            let x: Vec<f64> = (0..8).map(|_| standard_normal(&mut r)).collect();
            let p = project_to_states(&x, &basis);
            let again = project_to_states(&p, &basis);
            let m = min_eigenvalue(&BlochVector(DVector::from_vec(p.clone())), &basis);
            prop_assert!(m > -1e-12);
            for (a, b) in p.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
