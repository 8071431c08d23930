//! Operator spreading in small spin chains, quantified through the
//! information gained by continuous weak-measurement tomography and compared
//! against Krylov complexity.
//!
//! The crate is organized bottom-up:
//!
//! * [`opspace`]: generalized Gell-Mann basis, Bloch vectors, vectorization
//!   and adjoint-action superoperators.
//! * [`models`]: kicked and time-independent tilted-field Ising chains, the
//!   XXZ chain with a single impurity, observables, reflection symmetry and
//!   symmetry-adapted COE/GOE samples.
//! * [`evolve`]: Heisenberg time series and the inverse covariance matrix
//!   `C⁻¹ = ÕᵀÕ` of the measurement record.
//! * [`tomo`]: simulated records, least-squares estimates and the
//!   positivity-constrained projection onto physical states.
//! * [`metrics`]: covariance-spectrum entropy, Fisher information, rank and
//!   the log-volume bound.
//! * [`krylov`]: Liouvillian, full-orthogonalization Lanczos, Krylov
//!   complexity/entropy and a brute-force span-rank oracle.
//! * [`cli`]: config parsing, seeded experiment runner, CSV/JSON output and
//!   SVG panels.

pub mod cli;
pub mod error;
pub mod evolve;
pub mod krylov;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod opspace;
pub mod rng;
pub mod tomo;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
