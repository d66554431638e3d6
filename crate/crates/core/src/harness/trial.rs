//! One Monte Carlo trial: draw an instance from the trial's seed and run
//! every requested solver on it.

use crate::adaptive::run_ass;
use crate::baselines::{bpdn_shrinkage_traced, omp, oracle_exhaustive, residual_norm, BpdnConfig, RecoveryResult, SolverId};
use crate::error::Result;
use crate::harness::spec::ExperimentSpec;
use crate::metrics::mse;
use crate::model::{
    generate_sensing_matrix, generate_sparse_signal, synthesize_measurements, MasterSeed, NoiseLevel, SensingEnsemble,
    SparseSignal,
};

/// A (sparsity, SNR) cell of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub k: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub truth: SparseSignal,
    pub ensemble: SensingEnsemble,
}

/// A solver that finished.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSuccess {
    pub result: RecoveryResult,
    /// Squared error after each iteration for the adaptive solver (padded
    /// with the final value up to `n_max` when it stopped early); a single
    /// final value for the batch solvers.
    pub squared_error: Vec<f64>,
    pub residual_norm: f64,
    /// False only if a BPDN objective sequence ever increased.
    pub objective_monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub solver: SolverId,
    /// Reweighted factor, for the adaptive solver.
    pub epsilon: Option<f64>,
    pub outcome: std::result::Result<SolverSuccess, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_index: u64,
    pub instance: Instance,
    pub runs: Vec<SolverRun>,
}

impl TrialOutcome {
    pub fn run(&self, solver: SolverId, epsilon: Option<f64>) -> Option<&SolverRun> {
        self.runs
            .iter()
            .find(|r| r.solver == solver && (!solver.is_adaptive() || r.epsilon == epsilon))
    }
}

/// Draws the trial's instance. The sensing matrix depends only on the seed
/// and trial index, so every grid point of a trial shares it.
pub fn build_instance(spec: &ExperimentSpec, point: GridPoint, trial_index: u64) -> Result<Instance> {
    let mut streams = MasterSeed::new(spec.master_seed, trial_index).streams();
    let x = generate_sensing_matrix(spec.m_dim, spec.n_dim, &mut streams.matrix)?;
    let truth = generate_sparse_signal(spec.n_dim, point.k, &mut streams.signal)?;
    let noise = if spec.no_noise {
        NoiseLevel::Noiseless
    } else {
        NoiseLevel::Snr {
            db: point.snr_db,
            convention: spec.snr_convention,
        }
    };
    let ensemble = synthesize_measurements(&x, &truth, noise, &mut streams.noise)?;
    Ok(Instance { truth, ensemble })
}

/// Runs every solver of `spec` (the adaptive one once per epsilon) on the
/// same instance. Solver failures are recorded, not raised.
pub fn run_trial(spec: &ExperimentSpec, point: GridPoint, trial_index: u64) -> Result<TrialOutcome> {
    let instance = build_instance(spec, point, trial_index)?;
    let n_max = spec.n_max();
    let mut runs = Vec::new();
    for &solver in &spec.solvers {
        if solver.is_adaptive() {
            for &eps in &spec.effective_epsilons() {
                runs.push(SolverRun {
                    solver,
                    epsilon: Some(eps),
                    outcome: run_adaptive(spec, &instance, eps, n_max),
                });
            }
        } else {
            runs.push(SolverRun {
                solver,
                epsilon: None,
                outcome: run_batch(spec, &instance, point, solver),
            });
        }
    }
    Ok(TrialOutcome {
        trial_index,
        instance,
        runs,
    })
}

fn run_adaptive(
    spec: &ExperimentSpec,
    instance: &Instance,
    epsilon: f64,
    n_max: usize,
) -> std::result::Result<SolverSuccess, String> {
    let cfg = spec.rza_for(epsilon);
    let (result, trace) = run_ass(&instance.ensemble, &cfg, Some(&instance.truth)).map_err(|e| e.to_string())?;
    let mut squared_error = trace.per_iteration_mse.unwrap_or_default();
    let last = squared_error.last().copied().unwrap_or(0.0);
    squared_error.resize(n_max, last);
    let x = &instance.ensemble.sensing_matrix;
    Ok(SolverSuccess {
        residual_norm: residual_norm(x, &instance.ensemble.observations, &result.estimate),
        result,
        squared_error,
        objective_monotone: true,
    })
}

fn run_batch(
    spec: &ExperimentSpec,
    instance: &Instance,
    point: GridPoint,
    solver: SolverId,
) -> std::result::Result<SolverSuccess, String> {
    let x = &instance.ensemble.sensing_matrix;
    let y = &instance.ensemble.observations;
    let mut objective_monotone = true;
    let result = match solver {
        SolverId::NssOmp => omp(x, y, point.k.max(1), spec.omp_residual_tol),
        SolverId::OracleExhaustive => oracle_exhaustive(x, y, point.k),
        SolverId::NssBpdn => {
            let cfg = BpdnConfig {
                lambda: spec.bpdn_lambda(instance.ensemble.noise_variance),
                ..spec.bpdn_config
            };
            bpdn_shrinkage_traced(x, y, &cfg).map(|(r, trace)| {
                objective_monotone = trace.windows(2).all(|w| w[1] <= w[0]);
                r
            })
        }
        SolverId::AssRzaNlmf => unreachable!("adaptive solver handled separately"),
    }
    .map_err(|e| e.to_string())?;
    let err = mse(&instance.truth.coefficients, &result.estimate).map_err(|e| e.to_string())?;
    Ok(SolverSuccess {
        residual_norm: residual_norm(x, y, &result.estimate),
        result,
        squared_error: vec![err],
        objective_monotone,
    })
}
