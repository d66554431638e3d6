//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::process::{Command, ExitCode};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparse_sensing::adaptive::{run_ass, EstimatorState, RzaNlmfConfig};
use sparse_sensing::baselines::{bpdn_objective, bpdn_shrinkage_traced, BpdnConfig, SolverId};
use sparse_sensing::harness::{build_instance, run_experiment, run_trial, ExperimentSpec, GridPoint, ResultTable};
use sparse_sensing::metrics::{crlb_ass, crlb_nss, CrlbInputs};
use sparse_sensing::model::{synthesize_measurements, NoiseLevel, SparseSignal};
use sparse_sensing::support::Supports;

/// BPDN objective increases seen by any run of this suite.
static BPDN_VIOLATIONS: AtomicUsize = AtomicUsize::new(0);
/// BPDN runs checked.
static BPDN_RUNS: AtomicUsize = AtomicUsize::new(0);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn note_table(table: &ResultTable, bpdn_runs: usize) {
    BPDN_VIOLATIONS.fetch_add(table.bpdn_monotonicity_violations, Ordering::SeqCst);
    BPDN_RUNS.fetch_add(bpdn_runs, Ordering::SeqCst);
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}


fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 8;
    let mu = 1.5;
    let cfg = RzaNlmfConfig {
        lambda_ass: 0.0,
        ..RzaNlmfConfig::default()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = normal_vec(&mut rng, n);
        let h = normal_vec(&mut rng, n);
        let y: f64 = rng.sample::<f64, _>(StandardNormal) * 2.0;
        let cost = |h: &DVector<f64>| 0.25 * (y - x.dot(h)).powi(4);
        let e = y - x.dot(&h);
        let step = 1e-5 * (1.0 + h.amax());
        let grad = DVector::from_fn(n, |i, _| {
            let mut up = h.clone();
            let mut down = h.clone();
            up[i] += step;
            down[i] -= step;
            (cost(&up) - cost(&down)) / (2.0 * step)
        });
        let xx = x.norm_squared();
        let expected = -grad * (mu / (xx * (xx + e * e)));

        let mut state = EstimatorState::new(n);
        state.estimate = h.clone();
        state.step(&x, y, &cfg).unwrap();
        let moved = &state.estimate - &h;
        let rel = (&moved - &expected).norm() / expected.norm();
        worst = worst.max(rel);
    }
    verdict(worst < 1e-6, format!("worst relative error {worst:.3e} over 100 points (< 1e-6)"))
}

fn scalar_convergence() -> Verdict {
    let truth = SparseSignal {
        coefficients: DVector::from_element(1, 0.5),
        support: vec![0],
        per_nonzero_variance: 1.0,
    };
    let x = DMatrix::from_element(1, 1, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ensemble = synthesize_measurements(&x, &truth, NoiseLevel::Noiseless, &mut rng).unwrap();
    let cfg = RzaNlmfConfig {
        mu_iss: 1.0,
        lambda_ass: 0.0,
        zeta: 1e-10,
        n_max: Some(100_000_000),
        ..RzaNlmfConfig::default()
    };
    let (result, _) = run_ass(&ensemble, &cfg, None).unwrap();
    let estimate = result.estimate[0];

    // independent scalar recursion with the same stopping rule
    let (xs, y, mu) = (2.0f64, 1.0f64, 1.0f64);
    let mut h = 0.0f64;
    let mut steps = 0usize;
    loop {
        let e = y - xs * h;
        let mu_ass = mu * e * e / (xs * xs + e * e);
        let delta = mu_ass * e * xs / (xs * xs);
        h += delta;
        steps += 1;
        if delta.abs() < 1e-10 || steps >= 100_000_000 {
            break;
        }
    }
    let vs_recursion = (estimate - h).abs();
    let vs_truth = (estimate - 0.5).abs();
    verdict(
        vs_recursion < 1e-6 && vs_truth < 1e-6 && result.converged,
        format!(
            "estimate {estimate:.9} after {} iterations; |vs recursion| {vs_recursion:.2e}, |vs truth 0.5| {vs_truth:.2e} (both < 1e-6)",
            result.iterations_used
        ),
    )
}

fn crlb_formulas() -> Verdict {
    let nss = crlb_nss(2, 40, 0.1);
    let inputs = CrlbInputs {
        k: 2,
        n_dim: 40,
        noise_variance: 0.1,
        mu_iss: 1.5,
        coeff_variance: 0.5,
        rho: 1.5 * 5e-8 * 2000.0,
    };
    let got = crlb_ass(&inputs).unwrap();
    let (mu, sn2, s2, rho, n, k) = (1.5f64, 0.1f64, 0.5f64, 1.5e-4f64, 40.0f64, 2.0f64);
    let sn4 = sn2.powi(2);
    let want = (5.0 * mu * sn4) / ((9.0 * mu * sn2 * s2) - (2.0 * s2)) - (rho.powi(2) * n * k) / ((27.0 * mu * sn4) - (6.0 * mu * sn2));
    let diff = (got - want).abs();
    verdict(
        nss == 0.005 && diff < 1e-12,
        format!("crlb_nss = {nss}; crlb_ass = {got:.15e}, oracle diff {diff:.1e}"),
    )
}

fn epsilon_selection() -> Verdict {
    let spec = ExperimentSpec::epsilon_sweep();
    let table = run_experiment(&spec).unwrap();
    let window = spec.m_dim;
    let mut pass = true;
    let mut parts = Vec::new();
    for &snr in &spec.snr_grid_db {
        let curve: Vec<(f64, f64)> = spec
            .epsilon_grid
            .iter()
            .map(|&eps| (eps, table.steady_state(SolverId::AssRzaNlmf, 2, snr, eps, window).unwrap()))
            .collect();
        let best = curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let at_2000 = curve.iter().find(|c| c.0 == 2000.0).unwrap().1;
        pass &= at_2000 <= 2.0 * best;
        parts.push(format!("{snr} dB: eps=2000 {at_2000:.4e} vs best {best:.4e}"));
    }
    verdict(pass, parts.join("; "))
}

fn comparison_table() -> (ExperimentSpec, ResultTable) {
    let spec = ExperimentSpec {
        sparsity_levels: vec![2, 6, 10],
        snr_grid_db: vec![0.0, 10.0, 12.0],
        ..ExperimentSpec::comparison()
    };
    let table = run_experiment(&spec).unwrap();
    let points = spec.sparsity_levels.len() * spec.snr_grid_db.len();
    note_table(&table, points * spec.trials);
    (spec, table)
}

fn ass_beats_nss(spec: &ExperimentSpec, table: &ResultTable) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for snr in [0.0, 10.0, 12.0] {
        let ass = table.steady_state(SolverId::AssRzaNlmf, 2, snr, 2000.0, spec.m_dim).unwrap();
        let omp = table.steady_state(SolverId::NssOmp, 2, snr, 2000.0, 1).unwrap();
        let bpdn = table.steady_state(SolverId::NssBpdn, 2, snr, 2000.0, 1).unwrap();
        pass &= ass < omp && ass < bpdn;
        parts.push(format!("{snr} dB: ass {ass:.4e} omp {omp:.4e} bpdn {bpdn:.4e}"));
    }
    verdict(pass, parts.join("; "))
}

fn sparsity_dependence(spec: &ExperimentSpec, table: &ResultTable) -> Verdict {
    let levels: Vec<f64> = [2, 6, 10]
        .iter()
        .map(|&k| table.steady_state(SolverId::AssRzaNlmf, k, 10.0, 2000.0, spec.m_dim).unwrap())
        .collect();
    let pass = levels.windows(2).all(|w| w[1] >= 0.95 * w[0]);
    verdict(
        pass,
        format!("K=2 {:.4e}, K=6 {:.4e}, K=10 {:.4e}", levels[0], levels[1], levels[2]),
    )
}

/// Minimiser of the BPDN objective by visiting every support of size at
/// most M with every sign pattern and keeping sign-consistent closed forms.
fn bpdn_grid_optimum(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> f64 {
    let (m, n) = x.shape();
    let mut best = bpdn_objective(x, y, &DVector::zeros(n), lambda);
    for size in 1..=m.min(n) {
        for support in Supports::new(n, size) {
            let sub = x.select_columns(&support);
            let gram = sub.transpose() * &sub;
            let Some(inv) = gram.try_inverse() else { continue };
            let xty = sub.transpose() * y;
            for pattern in 0..(1u32 << size) {
                let signs = DVector::from_fn(size, |i, _| if pattern >> i & 1 == 1 { -1.0 } else { 1.0 });
                let coef = &inv * (&xty - &signs * lambda);
                if coef.iter().zip(signs.iter()).any(|(c, s)| c * s <= 0.0) {
                    continue;
                }
                let mut h = DVector::zeros(n);
                for (i, &j) in support.iter().enumerate() {
                    h[j] = coef[i];
                }
                best = best.min(bpdn_objective(x, y, &h, lambda));
            }
        }
    }
    best
}

fn baseline_oracles() -> Verdict {
    let spec = ExperimentSpec {
        n_dim: 10,
        m_dim: 5,
        sparsity_levels: vec![2],
        snr_grid_db: vec![10.0],
        solvers: vec![SolverId::NssOmp, SolverId::OracleExhaustive],
        ..ExperimentSpec::comparison()
    };
    let point = GridPoint { k: 2, snr_db: 10.0 };
    let mut residual_ok = 0;
    for t in 0..100 {
        let out = run_trial(&spec, point, t).unwrap();
        let get = |s| out.run(s, None).unwrap().outcome.as_ref().unwrap().residual_norm;
        if get(SolverId::OracleExhaustive) <= get(SolverId::NssOmp) {
            residual_ok += 1;
        }
    }

    let small = ExperimentSpec {
        n_dim: 5,
        m_dim: 3,
        sparsity_levels: vec![2],
        ..spec.clone()
    };
    let mut worst_gap: f64 = 0.0;
    for t in 0..20 {
        let inst = build_instance(&small, point, t).unwrap();
        let x = &inst.ensemble.sensing_matrix;
        let y = &inst.ensemble.observations;
        let cfg = BpdnConfig::default();
        let (result, trace) = bpdn_shrinkage_traced(x, y, &cfg).unwrap();
        BPDN_RUNS.fetch_add(1, Ordering::SeqCst);
        if trace.windows(2).any(|w| w[1] > w[0]) {
            BPDN_VIOLATIONS.fetch_add(1, Ordering::SeqCst);
        }
        let optimum = bpdn_grid_optimum(x, y, cfg.lambda);
        worst_gap = worst_gap.max((result.objective_value.unwrap() - optimum).abs());
    }
    verdict(
        residual_ok == 100 && worst_gap < 1e-6,
        format!("oracle residual <= omp in {residual_ok}/100; worst BPDN objective gap {worst_gap:.2e} (< 1e-6)"),
    )
}

fn omp_noiseless() -> Verdict {
    let spec = ExperimentSpec {
        no_noise: true,
        sparsity_levels: vec![2],
        solvers: vec![SolverId::NssOmp],
        ..ExperimentSpec::comparison()
    };
    let point = GridPoint { k: 2, snr_db: 10.0 };
    let trials = 1000;
    let mut hits = 0;
    for t in 0..trials {
        let out = run_trial(&spec, point, t).unwrap();
        let est = &out.run(SolverId::NssOmp, None).unwrap().outcome.as_ref().unwrap().result.estimate;
        let truth = &out.instance.truth.coefficients;
        if est.iter().zip(truth.iter()).all(|(a, b)| (*a != 0.0) == (*b != 0.0)) {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    verdict(rate >= 0.95, format!("exact support recovery {hits}/{trials} = {rate:.3} (>= 0.95)"))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: usize, name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_sparse-sensing"))
            .args(["compare", "--workers", &workers.to_string(), "--out"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(&path).unwrap()
    };
    let a = run(1, "a.csv");
    let b = run(1, "b.csv");
    let c = run(4, "c.csv");
    let pass = !a.is_empty() && a == b && a == c;
    verdict(
        pass,
        format!("{} bytes; same workers identical: {}; 1 vs 4 workers identical: {}", a.len(), a == b, a == c),
    )
}

fn bpdn_monotone() -> Verdict {
    let violations = BPDN_VIOLATIONS.load(Ordering::SeqCst);
    let runs = BPDN_RUNS.load(Ordering::SeqCst);
    verdict(
        violations == 0 && runs > 0,
        format!("{violations} objective increases over {runs} BPDN runs"),
    )
}

type Check<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn main() -> ExitCode {
    let started = Instant::now();
    let (spec, table) = comparison_table();
    let checks: Vec<Check> = vec![
        ("1 update rule vs finite differences", Box::new(gradient_check)),
        ("2 scalar convergence", Box::new(scalar_convergence)),
        ("3 reference bound formulas", Box::new(crlb_formulas)),
        ("4 reweighted factor selection", Box::new(epsilon_selection)),
        ("5 adaptive beats batch at K=2", Box::new(|| ass_beats_nss(&spec, &table))),
        ("6 sparsity dependence", Box::new(|| sparsity_dependence(&spec, &table))),
        ("7 baseline oracle equivalence", Box::new(baseline_oracles)),
        ("8 OMP noiseless recovery", Box::new(omp_noiseless)),
        ("9 determinism across workers", Box::new(determinism)),
        ("10 BPDN monotonicity", Box::new(bpdn_monotone)),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let t = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {name}: {} ({:.1?})",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1?}",
        checks.len() - failed,
        checks.len(),
        started.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
