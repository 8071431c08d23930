//! Experiment orchestration: flat `key = value` configs, seeded parameter
//! sweeps, CSV and JSON outputs, and SVG panels.

mod config;
mod plot;
mod run;

pub use config::{ExperimentConfig, Metric, ModelKind, SweepParam, TimeGridSpec};
pub use plot::{plot, Panel};
pub use run::{
    build_dynamics, build_observable, run_experiment, run_point, Conventions, Dynamics, PointOutput, PointSummary,
    RunManifest, KRYLOV_B_FILE, KRYLOV_PROFILE_FILE, MANIFEST_FILE, METRICS_COLUMNS, METRICS_FILE,
};

use crate::error::Error;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "OPSPREAD_OUT";

/// Process exit code for an error: 2 for bad input, 3 for numerical or
/// internal failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidDimension(_)
        | Error::HorizonTooLong { .. }
        | Error::MissingColumns(_)
        | Error::Io(_) => 2,
        _ => 3,
    }
}
