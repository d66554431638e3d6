//! Sparse recovery from compressive measurements.
//!
//! * [`model`] draws K-sparse signals, Gaussian sensing matrices and noisy
//!   observations from seeded streams.
//! * [`adaptive`] recovers the signal with the RZA-NLMF adaptive filter,
//!   cycling over the measurement rows.
//! * [`baselines`] holds the batch comparators (OMP, BPDN) and an
//!   exhaustive best-support oracle.
//! * [`metrics`] has the squared-error metric and the Cramer-Rao reference
//!   curves.
//! * [`harness`] runs seeded Monte Carlo grids and writes CSV.

pub mod adaptive;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod support;

pub use adaptive::{run_ass, EstimatorState, IterationTrace, RhoConvention, RzaNlmfConfig};
pub use baselines::{bpdn_shrinkage, omp, oracle_exhaustive, BpdnConfig, RecoveryResult, SolverId};
pub use error::{Error, Result};
pub use metrics::SnrConvention;
pub use model::{MasterSeed, NoiseLevel, SensingEnsemble, SparseSignal};
