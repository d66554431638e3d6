use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sparse_sensing::adaptive::{run_ass, RhoConvention};
use sparse_sensing::baselines::{bpdn_shrinkage, omp, oracle_exhaustive, residual_norm, BpdnConfig, SolverId};
use sparse_sensing::harness::{self, build_instance, ExperimentSpec, GridPoint, ResultTable};
use sparse_sensing::metrics::{crlb_ass, crlb_nss, mse, snr_to_noise_variance, CrlbInputs, SnrConvention};
use sparse_sensing::model::{generate_sensing_matrix, matrix_from_text, matrix_to_text, rip_constant_bruteforce, MasterSeed, RipOptions};
use sparse_sensing::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "sparse-sensing", version, about = "Adaptive and batch sparse recovery experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Master seed of the trial streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per grid point (the original protocol used 1000).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file (CSV).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "power10|paper20")]
    snr_convention: Option<SnrConvention>,
    #[arg(long, global = true, value_name = "gradient|paper")]
    rho_convention: Option<RhoConvention>,
    /// Observations without additive noise.
    #[arg(long, global = true)]
    no_noise: bool,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Sparsity levels, comma separated.
    #[arg(long = "k", global = true, value_delimiter = ',')]
    sparsity: Vec<usize>,
    /// SNR grid in dB, comma separated.
    #[arg(long = "snr", global = true, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Vec<f64>,
    /// Reweighted factors, comma separated.
    #[arg(long = "epsilon", global = true, value_delimiter = ',')]
    epsilon: Vec<f64>,
    /// Solvers: ass, omp, bpdn, oracle.
    #[arg(long, global = true, value_delimiter = ',')]
    solvers: Vec<SolverId>,
    /// Adaptive iteration cap.
    #[arg(long, global = true)]
    n_max: Option<usize>,
    #[arg(long, global = true)]
    n_dim: Option<usize>,
    #[arg(long, global = true)]
    m_dim: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One instance, one solver; prints the squared-error trajectory.
    SingleRun {
        #[arg(long, default_value = "ass")]
        solver: SolverId,
        /// Trial index of the instance.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Adaptive solver over the reweighted-factor grid.
    SweepEpsilon,
    /// Solvers x sparsity x SNR grid.
    Compare,
    /// Both reference bounds over the sparsity / SNR / epsilon grid.
    CrlbTable,
    /// Exact restricted isometry constants of a small matrix.
    RipCheck {
        /// Read the matrix from this text file instead of drawing one.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Largest order to evaluate.
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        /// Scale applied to the matrix (default 1/sqrt(M)).
        #[arg(long)]
        scale: Option<f64>,
        /// Write the matrix used in text form.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
}

fn build_spec(base: ExperimentSpec, c: &Common) -> Result<ExperimentSpec> {
    let mut spec = base;
    if let Some(path) = &c.config {
        spec.apply_config_file(path)?;
    }
    if let Some(v) = c.seed {
        spec.master_seed = v;
    }
    if let Some(v) = c.trials {
        spec.trials = v;
    }
    if let Some(v) = c.snr_convention {
        spec.snr_convention = v;
    }
    if let Some(v) = c.rho_convention {
        spec.rho_convention = v;
    }
    if c.no_noise {
        spec.no_noise = true;
    }
    if !c.sparsity.is_empty() {
        spec.sparsity_levels = c.sparsity.clone();
    }
    if !c.snr.is_empty() {
        spec.snr_grid_db = c.snr.clone();
    }
    if !c.epsilon.is_empty() {
        spec.epsilon_grid = c.epsilon.clone();
    }
    if !c.solvers.is_empty() {
        spec.solvers = c.solvers.clone();
    }
    if let Some(v) = c.n_max {
        spec.rza_config.n_max = Some(v);
    }
    if let Some(v) = c.n_dim {
        spec.n_dim = v;
    }
    if let Some(v) = c.m_dim {
        spec.m_dim = v;
    }
    spec.validate()?;
    Ok(spec)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn run_grid(spec: &ExperimentSpec, c: &Common) -> Result<()> {
    let started = Instant::now();
    let table = match c.workers {
        Some(w) => harness::run_experiment_with_workers(spec, w)?,
        None => harness::run_experiment(spec)?,
    };
    match &c.out {
        Some(path) => harness::emit_csv(&table, path)?,
        None => print!("{}", harness::to_csv_string(&table)),
    }
    print_summary(spec, &table, started);
    Ok(())
}

fn print_summary(spec: &ExperimentSpec, table: &ResultTable, started: Instant) {
    let points = spec.sparsity_levels.len() * spec.snr_grid_db.len() * spec.effective_epsilons().len();
    let lambda_rule = if spec.bpdn_universal_lambda {
        "sigma_n*sqrt(2 ln N)".to_string()
    } else {
        format!("{}", spec.bpdn_config.lambda)
    };
    eprintln!(
        "grid: {points} points ({} K x {} SNR x {} eps), N={} M={}, n_max={}",
        spec.sparsity_levels.len(),
        spec.snr_grid_db.len(),
        spec.effective_epsilons().len(),
        spec.n_dim,
        spec.m_dim,
        spec.n_max()
    );
    eprintln!(
        "trials: {} per point, seed {}, snr {}, rho {}, bpdn lambda {lambda_rule}",
        spec.trials, spec.master_seed, spec.snr_convention, spec.rho_convention
    );
    eprintln!("divergent runs: {}", table.divergent_runs);
    for msg in &table.failure_examples {
        eprintln!("  {msg}");
    }
    if table.bpdn_monotonicity_violations > 0 {
        eprintln!("bpdn objective increases: {}", table.bpdn_monotonicity_violations);
    }
    eprintln!("wall time: {:.2?}", started.elapsed());
}

fn single_run(spec: &ExperimentSpec, c: &Common, solver: SolverId, trial: u64) -> Result<()> {
    let point = GridPoint {
        k: spec.sparsity_levels[0],
        snr_db: spec.snr_grid_db[0],
    };
    let epsilon = spec.epsilon_grid[0];
    let instance = build_instance(spec, point, trial)?;
    let x = &instance.ensemble.sensing_matrix;
    let y = &instance.ensemble.observations;
    let truth = &instance.truth;
    let mut text = String::from("iteration,squared_error,prediction_error\n");
    let result = match solver {
        SolverId::AssRzaNlmf => {
            let (result, trace) = run_ass(&instance.ensemble, &spec.rza_for(epsilon), Some(truth))?;
            let mses = trace.per_iteration_mse.unwrap_or_default();
            for (i, (m, e)) in mses.iter().zip(&trace.per_iteration_error).enumerate() {
                text.push_str(&format!("{},{m:.16e},{e:.16e}\n", i + 1));
            }
            result
        }
        other => {
            let result = match other {
                SolverId::NssOmp => omp(x, y, point.k, spec.omp_residual_tol)?,
                SolverId::NssBpdn => {
                    let cfg = BpdnConfig {
                        lambda: spec.bpdn_lambda(instance.ensemble.noise_variance),
                        ..spec.bpdn_config
                    };
                    bpdn_shrinkage(x, y, &cfg)?
                }
                SolverId::OracleExhaustive => oracle_exhaustive(x, y, point.k)?,
                SolverId::AssRzaNlmf => unreachable!(),
            };
            let err = mse(&truth.coefficients, &result.estimate)?;
            text.push_str(&format!("{},{err:.16e},NaN\n", result.iterations_used));
            result
        }
    };
    write_output(c.out.as_deref(), &text)?;
    eprintln!(
        "{} on K={} SNR={} dB trial {trial}: {} iterations, converged={}, squared error {:.6e}, residual {:.6e}",
        result.solver_id,
        point.k,
        point.snr_db,
        result.iterations_used,
        result.converged,
        mse(&truth.coefficients, &result.estimate)?,
        residual_norm(x, y, &result.estimate)
    );
    Ok(())
}

fn crlb_table(spec: &ExperimentSpec, c: &Common) -> Result<()> {
    let mut text = String::from("k,snr_db,epsilon,noise_variance,crlb_nss,crlb_ass\n");
    for &k in &spec.sparsity_levels {
        for &snr in &spec.snr_grid_db {
            let noise_variance = snr_to_noise_variance(snr, spec.snr_convention);
            for &eps in &spec.epsilon_grid {
                let ass = crlb_ass(&CrlbInputs {
                    k,
                    n_dim: spec.n_dim,
                    noise_variance,
                    mu_iss: spec.rza_config.mu_iss,
                    coeff_variance: 1.0 / k as f64,
                    rho: spec.rza_for(eps).rho(),
                })
                .unwrap_or(f64::NAN);
                text.push_str(&format!(
                    "{k},{},{},{},{},{}\n",
                    harness::csv::format_real(snr),
                    harness::csv::format_real(eps),
                    harness::csv::format_real(noise_variance),
                    harness::csv::format_real(crlb_nss(k, spec.n_dim, noise_variance)),
                    harness::csv::format_real(ass),
                ));
            }
        }
    }
    write_output(c.out.as_deref(), &text)
}

fn rip_check(
    spec: &ExperimentSpec,
    c: &Common,
    matrix: Option<&Path>,
    k_max: usize,
    scale: Option<f64>,
    dump: Option<&Path>,
) -> Result<()> {
    let x = match matrix {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::File {
                path: path.to_path_buf(),
                source,
            })?;
            matrix_from_text(&text)?
        }
        None => {
            let mut streams = MasterSeed::new(spec.master_seed, 0).streams();
            generate_sensing_matrix(spec.m_dim, spec.n_dim, &mut streams.matrix)?
        }
    };
    if let Some(path) = dump {
        write_output(Some(path), &matrix_to_text(&x))?;
    }
    let scale = scale.unwrap_or(1.0 / (x.nrows() as f64).sqrt());
    let mut text = String::from("k,delta\n");
    for k in 1..=k_max {
        let delta = rip_constant_bruteforce(&x, k, RipOptions { scale, ..RipOptions::default() })?;
        text.push_str(&format!("{k},{}\n", harness::csv::format_real(delta)));
    }
    write_output(c.out.as_deref(), &text)
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::SingleRun { solver, trial } => {
            let spec = build_spec(ExperimentSpec::comparison(), c)?;
            single_run(&spec, c, *solver, *trial)
        }
        Command::SweepEpsilon => run_grid(&build_spec(ExperimentSpec::epsilon_sweep(), c)?, c),
        Command::Compare => run_grid(&build_spec(ExperimentSpec::comparison(), c)?, c),
        Command::CrlbTable => {
            let mut base = ExperimentSpec::comparison();
            base.epsilon_grid = harness::EPSILON_GRID.to_vec();
            crlb_table(&build_spec(base, c)?, c)
        }
        Command::RipCheck {
            matrix,
            k_max,
            scale,
            dump_matrix,
        } => {
            // only the dimensions and seed matter here
            let base = ExperimentSpec {
                sparsity_levels: vec![1],
                ..ExperimentSpec::comparison()
            };
            let spec = build_spec(base, c)?;
            rip_check(&spec, c, matrix.as_deref(), *k_max, *scale, dump_matrix.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
