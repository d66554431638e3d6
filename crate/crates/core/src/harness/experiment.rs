//! Grid runner: averages per-trial squared errors into MSE curves.

use rayon::prelude::*;

use crate::baselines::SolverId;
use crate::error::{Error, Result};
use crate::harness::spec::ExperimentSpec;
use crate::harness::trial::{run_trial, GridPoint, TrialOutcome};
use crate::metrics::{crlb_ass, crlb_nss, snr_to_noise_variance, CrlbInputs};

/// Trials evaluated in parallel before their results are folded in.
const CHUNK: usize = 128;

/// One aggregated point of an MSE curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub solver_id: SolverId,
    pub k: usize,
    pub snr_db: f64,
    pub epsilon: f64,
    /// Adaptive iteration (from 1); 0 for the single point of a batch solver.
    pub iteration: usize,
    pub avg_mse: f64,
    /// Trials that contributed to the average.
    pub trials: usize,
    pub crlb_nss: f64,
    pub crlb_ass: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// Solver runs that failed (diverged or errored). Their trials are left
    /// out of every average of the affected experiment.
    pub divergent_runs: usize,
    /// Trial evaluations performed (trials x grid points).
    pub total_trials: usize,
    /// BPDN runs whose objective ever increased. Expected to stay zero.
    pub bpdn_monotonicity_violations: usize,
    /// First few failure messages, for the summary.
    pub failure_examples: Vec<String>,
}

impl ResultTable {
    pub fn rows_for(
        &self,
        solver: SolverId,
        k: usize,
        snr_db: f64,
        epsilon: f64,
    ) -> impl Iterator<Item = &ResultRow> + '_ {
        self.rows
            .iter()
            .filter(move |r| r.solver_id == solver && r.k == k && r.snr_db == snr_db && r.epsilon == epsilon)
    }

    /// Steady-state MSE: the mean over the last `window` iterations of an
    /// adaptive curve, or the single point of a batch solver.
    pub fn steady_state(&self, solver: SolverId, k: usize, snr_db: f64, epsilon: f64, window: usize) -> Option<f64> {
        let rows: Vec<&ResultRow> = self.rows_for(solver, k, snr_db, epsilon).collect();
        if rows.is_empty() {
            return None;
        }
        let tail = &rows[rows.len().saturating_sub(window.max(1))..];
        Some(tail.iter().map(|r| r.avg_mse).sum::<f64>() / tail.len() as f64)
    }
}

/// Stable identifier of a grid cell; sorts in grid order.
pub fn experiment_id(index: usize, k: usize, snr_db: f64, epsilon: f64) -> String {
    format!("g{index:04}_k{k}_snr{snr_db}_eps{epsilon}")
}

/// Runs the whole grid on the global rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut table = ResultTable::default();
    let mut index = 0;
    for &k in &spec.sparsity_levels {
        for &snr_db in &spec.snr_grid_db {
            let point = GridPoint { k, snr_db };
            run_point(spec, point, &mut index, &mut table)?;
        }
    }
    table.rows.sort_by(|a, b| {
        (a.experiment_id.as_str(), a.solver_id.as_str(), a.iteration).cmp(&(
            b.experiment_id.as_str(),
            b.solver_id.as_str(),
            b.iteration,
        ))
    });
    Ok(table)
}

/// Runs the grid on a dedicated pool of `workers` threads. The output does
/// not depend on the worker count.
pub fn run_experiment_with_workers(spec: &ExperimentSpec, workers: usize) -> Result<ResultTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_experiment(spec))
}

struct Accumulator {
    epsilon: f64,
    adaptive: Vec<f64>,
    batch: Vec<(SolverId, f64)>,
    count: usize,
}

fn run_point(spec: &ExperimentSpec, point: GridPoint, index: &mut usize, table: &mut ResultTable) -> Result<()> {
    let n_max = spec.n_max();
    let has_adaptive = spec.solvers.contains(&SolverId::AssRzaNlmf);
    let batch_solvers: Vec<SolverId> = spec.solvers.iter().copied().filter(|s| !s.is_adaptive()).collect();
    let mut accs: Vec<Accumulator> = spec
        .effective_epsilons()
        .into_iter()
        .map(|epsilon| Accumulator {
            epsilon,
            adaptive: if has_adaptive { vec![0.0; n_max] } else { Vec::new() },
            batch: batch_solvers.iter().map(|&s| (s, 0.0)).collect(),
            count: 0,
        })
        .collect();

    let trials = spec.trials as u64;
    let mut start = 0u64;
    while start < trials {
        let end = (start + CHUNK as u64).min(trials);
        let outcomes: Vec<TrialOutcome> = (start..end)
            .into_par_iter()
            .map(|t| run_trial(spec, point, t))
            .collect::<Result<_>>()?;
        for outcome in &outcomes {
            fold_trial(outcome, has_adaptive, &mut accs, table);
        }
        start = end;
    }
    table.total_trials += spec.trials;

    let noise_variance = if spec.no_noise {
        0.0
    } else {
        snr_to_noise_variance(point.snr_db, spec.snr_convention)
    };
    let nss_bound = crlb_nss(point.k, spec.n_dim, noise_variance);
    for acc in accs {
        let id = experiment_id(*index, point.k, point.snr_db, acc.epsilon);
        *index += 1;
        let ass_bound = crlb_ass(&CrlbInputs {
            k: point.k,
            n_dim: spec.n_dim,
            noise_variance,
            mu_iss: spec.rza_config.mu_iss,
            coeff_variance: 1.0 / point.k as f64,
            rho: spec.rza_for(acc.epsilon).rho(),
        })
        .unwrap_or(f64::NAN);
        let count = acc.count;
        let mean = |sum: f64| if count == 0 { f64::NAN } else { sum / count as f64 };
        let row = |solver_id: SolverId, iteration: usize, avg_mse: f64| ResultRow {
            experiment_id: id.clone(),
            solver_id,
            k: point.k,
            snr_db: point.snr_db,
            epsilon: acc.epsilon,
            iteration,
            avg_mse,
            trials: count,
            crlb_nss: nss_bound,
            crlb_ass: ass_bound,
        };
        for (i, &sum) in acc.adaptive.iter().enumerate() {
            table.rows.push(row(SolverId::AssRzaNlmf, i + 1, mean(sum)));
        }
        for &(solver, sum) in &acc.batch {
            table.rows.push(row(solver, 0, mean(sum)));
        }
    }
    Ok(())
}

fn fold_trial(outcome: &TrialOutcome, has_adaptive: bool, accs: &mut [Accumulator], table: &mut ResultTable) {
    for run in &outcome.runs {
        match &run.outcome {
            Err(msg) => {
                table.divergent_runs += 1;
                if table.failure_examples.len() < 8 {
                    table
                        .failure_examples
                        .push(format!("trial {} {}: {msg}", outcome.trial_index, run.solver));
                }
            }
            Ok(s) if run.solver == SolverId::NssBpdn && !s.objective_monotone => {
                table.bpdn_monotonicity_violations += 1;
            }
            Ok(_) => {}
        }
    }
    let batch_ok = outcome
        .runs
        .iter()
        .filter(|r| !r.solver.is_adaptive())
        .all(|r| r.outcome.is_ok());
    if !batch_ok {
        return;
    }
    for acc in accs.iter_mut() {
        let adaptive = if has_adaptive {
            match outcome.run(SolverId::AssRzaNlmf, Some(acc.epsilon)).map(|r| &r.outcome) {
                Some(Ok(s)) => Some(s),
                _ => continue,
            }
        } else {
            None
        };
        if let Some(s) = adaptive {
            for (sum, v) in acc.adaptive.iter_mut().zip(&s.squared_error) {
                *sum += v;
            }
        }
        for (solver, sum) in acc.batch.iter_mut() {
            let s = outcome
                .run(*solver, None)
                .and_then(|r| r.outcome.as_ref().ok())
                .expect("batch runs checked above");
            *sum += s.squared_error[0];
        }
        acc.count += 1;
    }
}
