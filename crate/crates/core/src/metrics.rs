//! Quantifiers of information gain computed from the spectrum of `C⁻¹`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::InverseCovariance;
use crate::linalg::{self, CMatrix};

/// Default weight/Fisher regularization, relative to `Tr(C⁻¹)/(d²−1)`.
pub const DEFAULT_EPSILON_REL: f64 = 1e-6;

/// Floor used when `C⁻¹ = 0`, so that `ε > 0` is always defined.
const EPSILON_FLOOR: f64 = 1e-300;

/// `ε = rel · Tr(C⁻¹)/(d²−1)`.
pub fn regularization_epsilon(invcov: &InverseCovariance, rel: f64) -> f64 {
    (rel * invcov.trace() / invcov.dim() as f64).max(EPSILON_FLOOR)
}

/// Shannon entropy (nats) of the normalized eigenvalue spectrum of `C⁻¹`.
pub fn shannon_entropy(invcov: &InverseCovariance) -> Result<f64> {
    spectrum_entropy(invcov.eigenvalues())
}

/// Entropy of a nonnegative spectrum after normalization. Small negative
/// roundoff eigenvalues are treated as zero.
pub fn spectrum_entropy(values: &[f64]) -> Result<f64> {
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedEntropy);
    }
    Ok(values
        .iter()
        .map(|v| v.max(0.0) / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

/// `J = 1 / Tr[(C⁻¹ + εI)⁻¹]`.
pub fn fisher_information(invcov: &InverseCovariance, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be > 0")));
    }
    let s: f64 = invcov.eigenvalues().iter().map(|l| 1.0 / (l.max(0.0) + epsilon)).sum();
    Ok(1.0 / s)
}

pub fn covariance_rank(invcov: &InverseCovariance) -> usize {
    invcov.rank()
}

/// `Tr[(ρ₀ − ρ̄)²]`.
pub fn hs_distance(rho0: &CMatrix, rho_bar: &CMatrix) -> f64 {
    linalg::hs_norm_sqr(&(rho0 - rho_bar))
}

/// Log inverse error-ellipsoid volume and its arithmetic–geometric mean bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutualInfoDiagnostics {
    /// `½ Σ ln(λ_i + ε)`.
    pub log_inv_volume: f64,
    /// `Tr(C⁻¹ + εI)`.
    pub trace: f64,
    /// `(d²−1)/2 · ln(Tr(C⁻¹ + εI)/(d²−1))`.
    pub uniform_bound: f64,
}

impl MutualInfoDiagnostics {
    pub fn within_bound(&self) -> bool {
        self.log_inv_volume <= self.uniform_bound + 1e-9 * (1.0 + self.uniform_bound.abs())
    }
}

pub fn mutual_info_diagnostics(invcov: &InverseCovariance, epsilon: f64) -> Result<MutualInfoDiagnostics> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be > 0")));
    }
    let values = invcov.eigenvalues();
    let m = values.len() as f64;
    let log_inv_volume = 0.5 * values.iter().map(|l| (l.max(0.0) + epsilon).ln()).sum::<f64>();
    let trace = invcov.trace() + m * epsilon;
    let uniform_bound = 0.5 * m * (trace / m).ln();
    let diag = MutualInfoDiagnostics { log_inv_volume, trace, uniform_bound };
    if !diag.within_bound() {
        return Err(Error::Numeric(format!(
            "log inverse volume {log_inv_volume} exceeds uniform bound {uniform_bound}"
        )));
    }
    Ok(diag)
}

/// One row of the information-gain time series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub n: usize,
    pub entropy: f64,
    pub fisher: f64,
    pub rank: usize,
    pub trace_invcov: f64,
    pub log_inv_volume: f64,
    pub mean_fidelity: f64,
    pub fidelity_stderr: f64,
}

/// Spectrum-derived metrics at one time step; `mean_fidelity` and
/// `fidelity_stderr` are filled in from the ensemble.
pub fn spectral_row(n: usize, invcov: &InverseCovariance, epsilon: f64) -> Result<MetricsRow> {
    let mi = mutual_info_diagnostics(invcov, epsilon)?;
    Ok(MetricsRow {
        n,
        entropy: shannon_entropy(invcov)?,
        fisher: fisher_information(invcov, epsilon)?,
        rank: covariance_rank(invcov),
        trace_invcov: invcov.trace(),
        log_inv_volume: mi.log_inv_volume,
        mean_fidelity: f64::NAN,
        fidelity_stderr: f64::NAN,
    })
}

/// Per-time-step metrics over a whole run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTimeSeries {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTimeSeries {
    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    pub fn rank_non_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].rank >= w[0].rank)
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn diag(values: &[f64]) -> InverseCovariance {
        InverseCovariance::from_gram(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)), 1).unwrap()
    }

    #[test]
    fn entropy_closed_forms() {
        assert!(shannon_entropy(&diag(&[3.0, 0.0, 0.0])).unwrap().abs() < 1e-15);
        let s = shannon_entropy(&diag(&[2.0, 2.0, 2.0, 0.0])).unwrap();
        assert!((s - 3f64.ln()).abs() < 1e-14);
        assert!(matches!(shannon_entropy(&diag(&[0.0, 0.0])), Err(Error::UndefinedEntropy)));
    }

    #[test]
    fn fisher_closed_forms() {
        let eps = 1e-3;
        let j = fisher_information(&diag(&[0.0; 8]), eps).unwrap();
        assert!((j - eps / 8.0).abs() < 1e-18);
        let j = fisher_information(&diag(&[0.5; 8]), eps).unwrap();
        assert!((j - (0.5 + eps) / 8.0).abs() < 1e-15);
        assert!(fisher_information(&diag(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn am_gm_cases() {
        let d = mutual_info_diagnostics(&diag(&[0.7; 15]), 1e-6).unwrap();
        assert!((d.log_inv_volume - d.uniform_bound).abs() < 1e-12);
        let d = mutual_info_diagnostics(&diag(&[1.0, 0.0, 0.0]), 1e-3).unwrap();
        assert!(d.log_inv_volume < d.uniform_bound - 1e-3);
    }

    #[test]
    fn mean_stderr_basic() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
