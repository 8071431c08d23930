use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use nalgebra::DVector;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Metric, ModelKind, SweepParam};
use crate::error::{Error, Result};
use crate::evolve::{CovarianceAccumulator, HeisenbergSteps, SeriesOptions, RANK_THRESHOLD};
use crate::krylov::{self, KrylovProfile, FREQUENCY_MERGE};
use crate::linalg::{self, CMatrix, CVector};
use crate::metrics::{self, MetricsRow};
use crate::models::{self, IsingParams, Observable, XXZParams};
use crate::opspace::OperatorBasis;
use crate::rng;
use crate::tomo::{self, ProjectionOptions};

pub const METRICS_FILE: &str = "metrics.csv";
pub const KRYLOV_B_FILE: &str = "krylov_b.csv";
pub const KRYLOV_PROFILE_FILE: &str = "krylov_profile.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const METRICS_COLUMNS: [&str; 12] = [
    "n",
    "model",
    "L",
    "chaos_param",
    "mean_fidelity",
    "fidelity_stderr",
    "S_c",
    "J",
    "R",
    "trace_invcov",
    "log_inv_volume",
    "unconverged",
];

// sub-stream tags for derive_seed
const STATE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const SAMPLE_STREAM: u64 = 3;
const ROTATION_STREAM: u64 = 4;

/// Dynamics of one sweep point.
#[derive(Clone, Debug)]
pub struct Dynamics {
    /// One-step propagator.
    pub unitary: CMatrix,
    /// Generator, for time-independent models.
    pub hamiltonian: Option<CMatrix>,
}

pub fn build_dynamics(cfg: &ExperimentConfig, value: f64) -> Result<Dynamics> {
    let seed = cfg.seed.ok_or_else(|| Error::Config("seed is required".into()))?;
    let sweep = cfg.sweep_param();
    let ising = |kicked| {
        let mut p = IsingParams::new(cfg.sites, cfg.coupling, cfg.h_x, cfg.h_z, kicked);
        match sweep {
            SweepParam::Hz => p.h_z = value,
            SweepParam::Hx => p.h_x = value,
            _ => {}
        }
        p
    };
    let from_h = |h: CMatrix| Dynamics { unitary: linalg::expm_hermitian(&h, cfg.time_step), hamiltonian: Some(h) };
    let sample_seed = rng::derive_seed(seed, &[SAMPLE_STREAM, value as u64]);
    Ok(match cfg.model {
        ModelKind::Tki => Dynamics { unitary: models::tki_floquet(&ising(true))?, hamiltonian: None },
        ModelKind::Ti => from_h(models::ti_hamiltonian(&ising(false))?),
        ModelKind::Xxz => {
            let mut p = XXZParams::new(cfg.sites, cfg.j_xy, cfg.j_zz, if sweep == SweepParam::G { value } else { cfg.g })
                .with_impurity(cfg.resolved_impurity_site(), cfg.impurity_axis);
            p.impurity_norm = cfg.resolved_impurity_norm();
            from_h(models::xxz_hamiltonian(&p)?)
        }
        ModelKind::Coe => Dynamics { unitary: models::coe_sample(cfg.sites, sample_seed)?, hamiltonian: None },
        ModelKind::Goe => from_h(models::goe_sample(cfg.sites, sample_seed)?),
    })
}

/// The configured observable, rotated by `u^{⊗L}` if requested.
pub fn build_observable(cfg: &ExperimentConfig) -> Result<Observable> {
    let o = models::parse_observable(&cfg.observable, cfg.sites)?;
    let Some(rot) = cfg.observable_rotation else {
        return Ok(o);
    };
    let seed = cfg.seed.ok_or_else(|| Error::Config("seed is required".into()))?;
    let u = models::haar_unitary(2, &mut rng::seeded(rng::derive_seed(seed, &[ROTATION_STREAM, rot])));
    let mut full = u.clone();
    for _ in 1..cfg.sites {
        full = full.kronecker(&u);
    }
    let rotated = linalg::hermitian_part(&(full.adjoint() * &o.matrix * &full));
    Observable::new(rotated, format!("u†({})u", o.label))
}

/// Everything computed for one sweep point.
#[derive(Clone, Debug)]
pub struct PointOutput {
    pub chaos_param: f64,
    pub rows: Vec<MetricsRow>,
    /// Ensemble members whose projection hit the iteration limit, per row.
    pub unconverged: Vec<usize>,
    /// `ε` at the last checkpoint.
    pub epsilon: f64,
    pub krylov_b: Vec<f64>,
    pub krylov_dim: Option<usize>,
    pub profile: Option<KrylovProfile>,
}

fn expectation(op: &CMatrix, psi: &CVector) -> f64 {
    psi.dotc(&(op * psi)).re
}

/// Runs one sweep point without touching the filesystem.
pub fn run_point(cfg: &ExperimentConfig, index: usize, value: f64) -> Result<PointOutput> {
    cfg.validate()?;
    let seed = cfg.seed.expect("validated");
    let d = cfg.hilbert_dim();
    let basis = OperatorBasis::new(d)?;
    let dim = basis.len();
    let dynamics = build_dynamics(cfg, value)?;
    let obs = build_observable(cfg)?;
    let horizon = cfg.resolved_horizon();
    let want_fidelity = cfg.wants(Metric::Fidelity);
    let opts = ProjectionOptions {
        epsilon_rel: cfg.epsilon_rel,
        epsilon: cfg.epsilon,
        max_iter: cfg.solver_max_iter,
        tol: cfg.solver_tol,
    };

    // the same ensemble at every sweep point; noise streams differ per point
    let members: Vec<CVector> = if want_fidelity {
        (0..cfg.ensemble_size)
            .map(|m| tomo::sample_haar_state(d, rng::derive_seed(seed, &[STATE_STREAM, m as u64])))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut noise: Vec<_> = (0..members.len())
        .map(|m| rng::seeded(rng::derive_seed(seed, &[NOISE_STREAM, index as u64, m as u64])))
        .collect();
    let normal = if cfg.sigma > 0.0 {
        Some(Normal::new(0.0, cfg.sigma).map_err(|e| Error::Config(format!("sigma: {e}")))?)
    } else {
        None
    };
    let mut projected = vec![DVector::<f64>::zeros(dim); members.len()];

    let mut acc = CovarianceAccumulator::new(dim);
    let mut rows = Vec::new();
    let mut unconverged = Vec::new();
    let mut epsilon = f64::NAN;
    let steps = HeisenbergSteps::new(&dynamics.unitary, &obs.matrix, horizon, SeriesOptions::default())?;
    for (k, op) in steps.enumerate() {
        let n = k + 1;
        let row = acc.push_operator(&op, &basis)?;
        if want_fidelity {
            let shift = linalg::trace(&op).re / d as f64;
            for ((p, psi), r) in projected.iter_mut().zip(&members).zip(noise.iter_mut()) {
                let mut m = expectation(&op, psi);
                if let Some(nd) = &normal {
                    m += nd.sample(r);
                }
                p.axpy(m - shift, &row, 1.0);
            }
        }
        if n % cfg.checkpoint_stride != 0 && n != horizon {
            continue;
        }
        let invcov = acc.snapshot()?;
        epsilon = opts.epsilon_for(&invcov);
        let mut mrow = metrics::spectral_row(n, &invcov, epsilon)?;
        let mut failed = 0;
        if want_fidelity {
            let results: Vec<(f64, bool)> = members
                .par_iter()
                .zip(projected.par_iter())
                .map(|(psi, p)| {
                    let r_ml = tomo::ml_estimate_from(&invcov, p);
                    tomo::reconstruct(r_ml, &invcov, &basis, psi, &opts).map(|r| (r.fidelity, r.converged))
                })
                .collect::<Result<_>>()?;
            let fids: Vec<f64> = results.iter().map(|r| r.0).collect();
            failed = results.iter().filter(|r| !r.1).count();
            (mrow.mean_fidelity, mrow.fidelity_stderr) = metrics::mean_stderr(&fids);
            if failed > 0 {
                warn!("{} {}={value} n={n}: {failed} projections did not converge", cfg.model, cfg.sweep_param().name());
            }
        }
        rows.push(mrow);
        unconverged.push(failed);
    }

    let (mut krylov_b, mut krylov_dim, mut profile) = (Vec::new(), None, None);
    if cfg.krylov {
        let h = dynamics.hamiltonian.as_ref().expect("validated: time-independent model");
        let lv = krylov::liouvillian(h)?;
        let data = krylov::krylov_chain(&lv, &obs.matrix, cfg.zero_tol)?;
        let (t_min, t_switch, t_max) = cfg.time_grid.resolve(d);
        let grid = krylov::time_grid(t_min, t_switch, t_max, cfg.time_grid.n_geom, cfg.time_grid.n_lin)?;
        profile = Some(krylov::krylov_profile(&lv, &obs.matrix, &data, &grid)?);
        krylov_b = data.lanczos_b().to_vec();
        krylov_dim = Some(data.dim());
    }
    Ok(PointOutput { chaos_param: value, rows, unconverged, epsilon, krylov_b, krylov_dim, profile })
}

/// Resolved conventions recorded with every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub epsilon_rel: f64,
    pub epsilon_override: Option<f64>,
    pub rank_threshold: f64,
    pub zero_tol: f64,
    pub frequency_merge: f64,
    pub boundary: String,
    pub impurity: Option<String>,
    pub time_step: f64,
    pub first_record: String,
    pub sweep_param: String,
    pub observable: String,
    pub krylov_frame: String,
    pub solver: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub chaos_param: f64,
    pub final_n: usize,
    pub final_rank: usize,
    pub final_entropy: f64,
    pub epsilon: f64,
    pub unconverged: usize,
    pub krylov_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub files: BTreeMap<String, String>,
    pub conventions: Conventions,
    pub points: Vec<PointSummary>,
    pub warnings: usize,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn conventions(cfg: &ExperimentConfig) -> Conventions {
    let impurity = (cfg.model == ModelKind::Xxz).then(|| {
        let norm = match cfg.resolved_impurity_norm() {
            models::ImpurityNorm::Pauli => "sigma",
            models::ImpurityNorm::Spin => "s",
        };
        format!("(g/2)*{norm}^{}_{}", cfg.impurity_axis, cfg.resolved_impurity_site())
    });
    Conventions {
        epsilon_rel: cfg.epsilon_rel,
        epsilon_override: cfg.epsilon,
        rank_threshold: RANK_THRESHOLD,
        zero_tol: cfg.zero_tol,
        frequency_merge: FREQUENCY_MERGE,
        boundary: "open".into(),
        impurity,
        time_step: cfg.time_step,
        first_record: "n=1 is the unevolved observable".into(),
        sweep_param: cfg.sweep_param().name().into(),
        observable: match cfg.observable_rotation {
            Some(r) => format!("{} rotated by single-qubit Haar unitary (stream {r})", cfg.observable),
            None => cfg.observable.clone(),
        },
        krylov_frame: "eigenbasis of H, frequency-clustered".into(),
        solver: format!("Douglas-Rachford with Anderson acceleration, max_iter={}, tol={:e}", cfg.solver_max_iter, cfg.solver_tol),
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs every sweep point in order and writes CSV files and the manifest
/// into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let mut files = BTreeMap::new();
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));

    let metrics_path = out.join(METRICS_FILE);
    let mut metrics_csv = csv::Writer::from_path(&metrics_path).map_err(csv_err)?;
    metrics_csv.write_record(METRICS_COLUMNS).map_err(csv_err)?;
    files.insert("metrics".into(), METRICS_FILE.to_string());

    let mut krylov_writers = if cfg.krylov {
        let mut b = csv::Writer::from_path(out.join(KRYLOV_B_FILE)).map_err(csv_err)?;
        b.write_record(["model", "L", "chaos_param", "k", "b"]).map_err(csv_err)?;
        let mut p = csv::Writer::from_path(out.join(KRYLOV_PROFILE_FILE)).map_err(csv_err)?;
        p.write_record(["model", "L", "chaos_param", "K", "t", "C_K", "S_K"]).map_err(csv_err)?;
        files.insert("krylov_b".into(), KRYLOV_B_FILE.to_string());
        files.insert("krylov_profile".into(), KRYLOV_PROFILE_FILE.to_string());
        Some((b, p))
    } else {
        None
    };

    let model = cfg.model.to_string();
    let sites = cfg.sites.to_string();
    let mut points = Vec::new();
    let mut warnings = 0;
    for (index, value) in cfg.sweep_values().into_iter().enumerate() {
        info!("{model} L={sites} {}={value}", cfg.sweep_param().name());
        let p = run_point(cfg, index, value)?;
        let param = fmt_f(value);
        for (row, &bad) in p.rows.iter().zip(&p.unconverged) {
            metrics_csv
                .write_record([
                    row.n.to_string(),
                    model.clone(),
                    sites.clone(),
                    param.clone(),
                    fmt_f(row.mean_fidelity),
                    fmt_f(row.fidelity_stderr),
                    fmt_f(row.entropy),
                    fmt_f(row.fisher),
                    row.rank.to_string(),
                    fmt_f(row.trace_invcov),
                    fmt_f(row.log_inv_volume),
                    bad.to_string(),
                ])
                .map_err(csv_err)?;
        }
        metrics_csv.flush()?;
        if let (Some((bw, pw)), Some(k), Some(prof)) = (krylov_writers.as_mut(), p.krylov_dim, p.profile.as_ref()) {
            for (i, b) in p.krylov_b.iter().enumerate() {
                bw.write_record([model.clone(), sites.clone(), param.clone(), (i + 1).to_string(), fmt_f(*b)])
                    .map_err(csv_err)?;
            }
            for ((t, ck), sk) in prof.times.iter().zip(&prof.complexity).zip(&prof.entropy) {
                pw.write_record([
                    model.clone(),
                    sites.clone(),
                    param.clone(),
                    k.to_string(),
                    fmt_f(*t),
                    fmt_f(*ck),
                    fmt_f(*sk),
                ])
                .map_err(csv_err)?;
            }
            bw.flush()?;
            pw.flush()?;
        }
        let last = p.rows.last().expect("horizon >= 1 gives at least one row");
        let bad: usize = p.unconverged.iter().sum();
        warnings += bad;
        points.push(PointSummary {
            chaos_param: value,
            final_n: last.n,
            final_rank: last.rank,
            final_entropy: last.entropy,
            epsilon: p.epsilon,
            unconverged: bad,
            krylov_dim: p.krylov_dim,
        });
    }

    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.to_pairs(),
        wall_time_s: start.elapsed().as_secs_f64(),
        files,
        conventions: conventions(cfg),
        points,
        warnings,
    };
    let mut f = File::create(out.join(MANIFEST_FILE))?;
    f.write_all(manifest.to_json()?.as_bytes())?;
    Ok(manifest)
}
