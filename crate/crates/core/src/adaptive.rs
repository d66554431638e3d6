//! Reweighted zero-attracting normalized least-mean-fourth (RZA-NLMF)
//! recovery.
//!
//! The estimator treats each measurement row `x_m` with observation `y_m`
//! as one sample of an adaptive filter and cycles over the rows. One step
//! minimizes the instantaneous cost
//!
//! ```text
//! G(n) = e_m(n)^4 / 4 + lambda * sum_i log(1 + eps |h_i|)
//! ```
//!
//! and reads
//!
//! ```text
//! h(n+1) = h(n) + mu(n) e x / |x|^2 - rho sgn(h(n)) / (1 + eps |h(n)|)
//! mu(n)  = mu_iss e^2 / (|x|^2 + e^2)
//! ```
//!
//! where the attractor is applied elementwise and `sgn(0) = 0`. The error
//! dependent step `mu(n)` stays below `mu_iss`, shrinking as the fit
//! improves. Coefficients much smaller than `1/eps` are pulled to zero at
//! nearly the full rate `rho`; large ones are left almost untouched.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::baselines::{RecoveryResult, SolverId};
use crate::error::{Error, Result};
use crate::metrics::mse;
use crate::model::{SensingEnsemble, SparseSignal};

/// Errors larger than this abort the run: the fourth-order recursion is
/// about to overflow.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// How the attractor gain `rho` is derived from the hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoConvention {
    /// `rho = mu_iss * lambda * eps`, the derivative of the log penalty.
    #[default]
    GradientConsistent,
    /// `rho = mu_iss * lambda / eps`, kept for comparison runs.
    PaperLiteral,
}

impl fmt::Display for RhoConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RhoConvention::GradientConsistent => "gradient",
            RhoConvention::PaperLiteral => "paper",
        })
    }
}

impl FromStr for RhoConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gradient" | "gradient_consistent" => Ok(RhoConvention::GradientConsistent),
            "paper" | "paper_literal" => Ok(RhoConvention::PaperLiteral),
            other => Err(format!("unknown rho convention {other:?} (expected gradient or paper)")),
        }
    }
}

/// Hyperparameters of the adaptive estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RzaNlmfConfig {
    /// Initial step size.
    pub mu_iss: f64,
    /// Penalty weight; zero disables the attractor (plain NLMF).
    pub lambda_ass: f64,
    /// Reweighted factor.
    pub epsilon: f64,
    /// Stop once an update moves the estimate by less than this.
    pub zeta: f64,
    /// Iteration cap; `None` means `20 * M * ceil(N / M)`.
    pub n_max: Option<usize>,
    pub rho_convention: RhoConvention,
}

impl Default for RzaNlmfConfig {
    fn default() -> Self {
        Self {
            mu_iss: 1.5,
            lambda_ass: 5e-8,
            epsilon: 2000.0,
            zeta: 1e-6,
            n_max: None,
            rho_convention: RhoConvention::GradientConsistent,
        }
    }
}

impl RzaNlmfConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("mu_iss", self.mu_iss)?;
        positive("epsilon", self.epsilon)?;
        positive("zeta", self.zeta)?;
        if !(self.lambda_ass.is_finite() && self.lambda_ass >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda_ass must be finite and >= 0, got {}",
                self.lambda_ass
            )));
        }
        if self.n_max == Some(0) {
            return Err(Error::InvalidInput("n_max must be positive".into()));
        }
        if !self.rho().is_finite() {
            return Err(Error::InvalidInput("attractor gain rho is not finite".into()));
        }
        Ok(())
    }

    /// Attractor gain.
    pub fn rho(&self) -> f64 {
        match self.rho_convention {
            RhoConvention::GradientConsistent => self.mu_iss * self.lambda_ass * self.epsilon,
            RhoConvention::PaperLiteral => self.mu_iss * self.lambda_ass / self.epsilon,
        }
    }

    pub fn effective_n_max(&self, m: usize, n: usize) -> usize {
        self.n_max.unwrap_or_else(|| default_n_max(m, n))
    }
}

/// `20 * M * ceil(N / M)`: twenty sweeps over the rows, rounded up to
/// whole passes of an `N`-dimensional estimate.
pub fn default_n_max(m: usize, n: usize) -> usize {
    let m = m.max(1);
    20 * m * n.div_ceil(m)
}

/// Row used at iteration `n` (1-based, in `1..=m_total`): `n mod M + 1`.
pub fn select_row(n: usize, m_total: usize) -> usize {
    n % m_total + 1
}

/// `y_m - x_m . estimate`.
pub fn iteration_error(x_m: &DVector<f64>, y_m: f64, estimate: &DVector<f64>) -> Result<f64> {
    if x_m.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            expected: estimate.len(),
            actual: x_m.len(),
        });
    }
    Ok(y_m - x_m.dot(estimate))
}

/// Error-dependent step `mu_iss e^2 / (|x_m|^2 + e^2)`, in `[0, mu_iss)`.
pub fn variable_step_size(mu_iss: f64, x_m: &DVector<f64>, e: f64) -> Result<f64> {
    step_from_energy(mu_iss, x_m.norm_squared(), e)
}

fn step_from_energy(mu_iss: f64, row_energy: f64, e: f64) -> Result<f64> {
    let e2 = e * e;
    let den = row_energy + e2;
    if den == 0.0 {
        return Err(Error::DegenerateSample);
    }
    Ok(mu_iss * e2 / den)
}

/// Elementwise `rho sgn(h_i) / (1 + eps |h_i|)`. Exact zeros map to zero.
pub fn zero_attractor(estimate: &DVector<f64>, rho: f64, epsilon: f64) -> DVector<f64> {
    estimate.map(|h| attractor_term(h, rho, epsilon))
}

#[inline]
fn attractor_term(h: f64, rho: f64, epsilon: f64) -> f64 {
    if h == 0.0 {
        0.0
    } else {
        rho * h.signum() / (1.0 + epsilon * h.abs())
    }
}

/// The evolving estimate and its iteration bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub estimate: DVector<f64>,
    pub iteration: usize,
    /// Norm of the most recent applied update.
    pub last_delta_norm: f64,
    pub converged: bool,
}

/// What a single step observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Prediction error before the update.
    pub error: f64,
    /// The row was all zeros and the estimate was left as is.
    pub skipped: bool,
}

impl EstimatorState {
    /// Zero estimate at iteration 0.
    pub fn new(n: usize) -> Self {
        Self {
            estimate: DVector::zeros(n),
            iteration: 0,
            last_delta_norm: f64::INFINITY,
            converged: false,
        }
    }

    /// Applies one RZA-NLMF update with sample `(x_m, y_m)`.
    ///
    /// An all-zero row carries no information: the iteration counter
    /// advances, the estimate and `last_delta_norm` stay as they were.
    pub fn step(&mut self, x_m: &DVector<f64>, y_m: f64, cfg: &RzaNlmfConfig) -> Result<StepReport> {
        let e = iteration_error(x_m, y_m, &self.estimate)?;
        self.iteration += 1;
        if !e.is_finite() || e.abs() > DIVERGENCE_THRESHOLD {
            return Err(Error::Divergence {
                iteration: self.iteration,
                reason: format!("prediction error {e:e} exceeds {DIVERGENCE_THRESHOLD:e}"),
            });
        }

        let row_energy = x_m.norm_squared();
        if row_energy == 0.0 {
            return Ok(StepReport { error: e, skipped: true });
        }
        let mu = step_from_energy(cfg.mu_iss, row_energy, e)?;
        let gain = mu * e / row_energy;
        let rho = cfg.rho();

        let mut delta_sq = 0.0;
        for (h, &x) in self.estimate.iter_mut().zip(x_m.iter()) {
            let next = *h + gain * x - attractor_term(*h, rho, cfg.epsilon);
            let d = next - *h;
            delta_sq += d * d;
            *h = next;
        }
        if !delta_sq.is_finite() {
            return Err(Error::Divergence {
                iteration: self.iteration,
                reason: "non-finite update".into(),
            });
        }
        self.last_delta_norm = delta_sq.sqrt();
        Ok(StepReport { error: e, skipped: false })
    }
}

/// Per-iteration record of an adaptive run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    /// `|h - h(n)|^2` after each iteration; present when the truth was supplied.
    pub per_iteration_mse: Option<Vec<f64>>,
    /// Prediction error `e_m(n)` of each iteration.
    pub per_iteration_error: Vec<f64>,
    pub final_iteration: usize,
}

/// Recovers a sparse vector by cycling the RZA-NLMF update over the rows of
/// the sensing matrix, starting from zero.
///
/// Runs while the last update moved the estimate by at least `zeta` and
/// fewer than `n_max` iterations have been taken. The convergence flag
/// tells the two exits apart.
pub fn run_ass(
    ensemble: &SensingEnsemble,
    cfg: &RzaNlmfConfig,
    truth: Option<&SparseSignal>,
) -> Result<(RecoveryResult, IterationTrace)> {
    cfg.validate()?;
    let x = &ensemble.sensing_matrix;
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("empty sensing ensemble".into()));
    }
    if ensemble.observations.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: ensemble.observations.len(),
        });
    }
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: t.len(),
            });
        }
    }

    let rows: Vec<DVector<f64>> = (0..m).map(|i| x.row(i).transpose()).collect();
    let n_max = cfg.effective_n_max(m, n);
    let mut state = EstimatorState::new(n);
    let mut errors = Vec::with_capacity(n_max.min(1 << 20));
    let mut mses = truth.map(|_| Vec::with_capacity(n_max.min(1 << 20)));

    while state.iteration < n_max {
        let row = select_row(state.iteration + 1, m) - 1;
        let report = state.step(&rows[row], ensemble.observations[row], cfg)?;
        errors.push(report.error);
        if let (Some(trace), Some(t)) = (mses.as_mut(), truth) {
            trace.push(mse(&t.coefficients, &state.estimate)?);
        }
        if !report.skipped && state.last_delta_norm < cfg.zeta {
            state.converged = true;
            break;
        }
    }

    let trace = IterationTrace {
        per_iteration_mse: mses,
        per_iteration_error: errors,
        final_iteration: state.iteration,
    };
    let result = RecoveryResult {
        estimate: state.estimate,
        solver_id: SolverId::AssRzaNlmf,
        iterations_used: state.iteration,
        converged: state.converged,
        objective_value: None,
    };
    Ok((result, trace))
}
