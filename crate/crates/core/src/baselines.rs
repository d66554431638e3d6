//! Batch sparse solvers used as comparators: orthogonal matching pursuit,
//! basis pursuit denoising by iterative shrinkage, and an exhaustive
//! best-support search for small instances.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::support::{check_cap, Supports, DEFAULT_ENUMERATION_CAP};

/// Relative size below which a diagonal entry of R marks a rank-deficient
/// column set.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverId {
    AssRzaNlmf,
    NssOmp,
    NssBpdn,
    OracleExhaustive,
}

impl SolverId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverId::AssRzaNlmf => "ass_rza_nlmf",
            SolverId::NssOmp => "nss_omp",
            SolverId::NssBpdn => "nss_bpdn",
            SolverId::OracleExhaustive => "oracle_exhaustive",
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, SolverId::AssRzaNlmf)
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ass_rza_nlmf" | "ass" | "rza-nlmf" => Ok(SolverId::AssRzaNlmf),
            "nss_omp" | "omp" => Ok(SolverId::NssOmp),
            "nss_bpdn" | "bpdn" => Ok(SolverId::NssBpdn),
            "oracle_exhaustive" | "oracle" => Ok(SolverId::OracleExhaustive),
            other => Err(format!("unknown solver {other:?}")),
        }
    }
}

/// Final output of any solver.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub estimate: DVector<f64>,
    pub solver_id: SolverId,
    pub iterations_used: usize,
    pub converged: bool,
    /// Final objective for solvers that minimize one (BPDN only).
    pub objective_value: Option<f64>,
}

/// `|y - X h|_2`.
pub fn residual_norm(x: &DMatrix<f64>, y: &DVector<f64>, estimate: &DVector<f64>) -> f64 {
    (y - x * estimate).norm()
}

fn check_system(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// Least squares on the columns in `support` (sorted, so the result does not
/// depend on selection order). Returns `None` when the columns are
/// numerically dependent.
fn least_squares_on(x: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Option<DVector<f64>> {
    if support.len() > x.nrows() {
        return None;
    }
    let sub = x.select_columns(support);
    let qr = sub.qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if scale == 0.0 || r.diagonal().iter().any(|d| d.abs() <= RANK_TOL * scale) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
}

fn scatter(n: usize, support: &[usize], values: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (&i, &v) in support.iter().zip(values.iter()) {
        out[i] = v;
    }
    out
}

/// Selection history of an OMP run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OmpTrace {
    /// Columns in the order they were picked.
    pub selected: Vec<usize>,
    /// Residual norm before the first pick and after each refit.
    pub residual_norms: Vec<f64>,
}

/// Orthogonal matching pursuit with at most `k` selections. Columns are
/// compared by their correlation with the residual after normalising each
/// to unit length.
pub fn omp(x: &DMatrix<f64>, y: &DVector<f64>, k: usize, residual_tol: f64) -> Result<RecoveryResult> {
    omp_traced(x, y, k, residual_tol).map(|(r, _)| r)
}

pub fn omp_traced(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    k: usize,
    residual_tol: f64,
) -> Result<(RecoveryResult, OmpTrace)> {
    check_system(x, y)?;
    let (m, n) = x.shape();
    if k == 0 || k > m.min(n) {
        return Err(Error::InvalidSparsity { k, n: m.min(n) });
    }

    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut in_support = vec![false; n];
    let mut sorted: Vec<usize> = Vec::with_capacity(k);
    let mut coef = DVector::zeros(0);
    let mut residual = y.clone();
    let mut norms = vec![residual.norm()];
    let column_norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();

    while selected.len() < k && residual.norm() > residual_tol {
        let corr = x.tr_mul(&residual);
        let pick = (0..n)
            .filter(|&j| !in_support[j])
            .fold(None::<(usize, f64)>, |best, j| {
                // correlation with the unit-norm column; all-zero columns never win
                let c = if column_norms[j] > 0.0 { corr[j].abs() / column_norms[j] } else { 0.0 };
                match best {
                    Some((_, b)) if b >= c => best,
                    _ => Some((j, c)),
                }
            })
            .map(|(j, _)| j)
            .expect("k <= n leaves a candidate column");
        selected.push(pick);
        in_support[pick] = true;
        let pos = sorted.partition_point(|&s| s < pick);
        sorted.insert(pos, pick);

        coef = least_squares_on(x, y, &sorted).ok_or(Error::RankDeficient {
            iteration: selected.len(),
        })?;
        residual = y - x.select_columns(&sorted) * &coef;
        norms.push(residual.norm());
    }

    let estimate = scatter(n, &sorted, &coef);
    let result = RecoveryResult {
        estimate,
        solver_id: SolverId::NssOmp,
        iterations_used: selected.len(),
        converged: true,
        objective_value: None,
    };
    Ok((
        result,
        OmpTrace {
            selected,
            residual_norms: norms,
        },
    ))
}

/// Settings for the shrinkage BPDN solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpdnConfig {
    /// Weight of the l1 term.
    pub lambda: f64,
    pub max_iterations: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tolerance: f64,
}

impl Default for BpdnConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_iterations: 20_000,
            tolerance: 1e-10,
        }
    }
}

impl BpdnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("bpdn lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidInput(format!("bpdn tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("bpdn max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// `0.5 |y - X h|^2 + lambda |h|_1`.
pub fn bpdn_objective(x: &DMatrix<f64>, y: &DVector<f64>, h: &DVector<f64>, lambda: f64) -> f64 {
    0.5 * (y - x * h).norm_squared() + lambda * h.lp_norm(1)
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest eigenvalue of `X^T X` by power iteration from a fixed start.
pub fn gram_spectral_norm(x: &DMatrix<f64>) -> f64 {
    let n = x.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..1000 {
        let w = x.tr_mul(&(x * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - estimate).abs() <= 1e-14 * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    // one more Rayleigh quotient on the converged direction
    let w = x.tr_mul(&(x * &v));
    estimate.max(v.dot(&w))
}

/// BPDN by proximal gradient: `h <- soft(h - X^T(X h - y)/L, lambda/L)`.
pub fn bpdn_shrinkage(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &BpdnConfig) -> Result<RecoveryResult> {
    bpdn_shrinkage_traced(x, y, cfg).map(|(r, _)| r)
}

/// As [`bpdn_shrinkage`], also returning the objective after every accepted
/// iterate (starting with the zero vector). The sequence is non-increasing:
/// should a step ever raise the objective, `L` is doubled and the step
/// retried.
pub fn bpdn_shrinkage_traced(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &BpdnConfig,
) -> Result<(RecoveryResult, Vec<f64>)> {
    check_system(x, y)?;
    cfg.validate()?;
    let n = x.ncols();
    let lambda = cfg.lambda;
    let mut lipschitz = gram_spectral_norm(x);

    let mut h = DVector::zeros(n);
    let mut objective = bpdn_objective(x, y, &h, lambda);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    if lipschitz == 0.0 {
        converged = true;
    }
    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let grad = x.tr_mul(&(x * &h - y));
        let mut accepted = None;
        for _ in 0..64 {
            let candidate = (&h - &grad / lipschitz).map(|v| soft_threshold(v, lambda / lipschitz));
            let value = bpdn_objective(x, y, &candidate, lambda);
            if !value.is_finite() {
                return Err(Error::Divergence {
                    iteration: iterations,
                    reason: format!("non-finite objective with L = {lipschitz:e}"),
                });
            }
            if value <= objective {
                accepted = Some((candidate, value));
                break;
            }
            lipschitz *= 2.0;
        }
        let Some((next, value)) = accepted else {
            // no descent even with tiny steps: already at the floating-point minimum
            converged = true;
            break;
        };
        let decrease = objective - value;
        h = next;
        let previous = objective;
        objective = value;
        trace.push(objective);
        if previous == 0.0 || decrease <= cfg.tolerance * previous {
            converged = true;
        }
    }

    let result = RecoveryResult {
        estimate: h,
        solver_id: SolverId::NssBpdn,
        iterations_used: iterations,
        converged,
        objective_value: Some(objective),
    };
    Ok((result, trace))
}

/// Best `k`-term least-squares fit by visiting every support of size `k`.
pub fn oracle_exhaustive(x: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<RecoveryResult> {
    oracle_exhaustive_capped(x, y, k, DEFAULT_ENUMERATION_CAP)
}

pub fn oracle_exhaustive_capped(x: &DMatrix<f64>, y: &DVector<f64>, k: usize, cap: u128) -> Result<RecoveryResult> {
    check_system(x, y)?;
    let (m, n) = x.shape();
    if k > m.min(n) {
        return Err(Error::InvalidSparsity { k, n: m.min(n) });
    }
    let supports = check_cap(n, k, cap)?;
    if k == 0 {
        return Ok(RecoveryResult {
            estimate: DVector::zeros(n),
            solver_id: SolverId::OracleExhaustive,
            iterations_used: 1,
            converged: true,
            objective_value: None,
        });
    }

    let mut best: Option<(f64, Vec<usize>, DVector<f64>)> = None;
    for support in Supports::new(n, k) {
        let Some(coef) = least_squares_on(x, y, &support) else {
            continue;
        };
        let res = (y - x.select_columns(&support) * &coef).norm_squared();
        if best.as_ref().is_none_or(|(b, _, _)| res < *b) {
            best = Some((res, support, coef));
        }
    }
    let (_, support, coef) =
        best.ok_or_else(|| Error::InvalidInput(format!("no full-rank support of size {k}")))?;
    Ok(RecoveryResult {
        estimate: scatter(n, &support, &coef),
        solver_id: SolverId::OracleExhaustive,
        iterations_used: supports as usize,
        converged: true,
        objective_value: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_row_slice(
            3,
            5,
            &[
                0.9, -0.3, 0.4, 1.2, -0.7, //
                0.1, 1.1, -0.8, 0.3, 0.5, //
                -0.6, 0.2, 0.9, -0.4, 1.0,
            ],
        );
        let y = DVector::from_column_slice(&[1.0, -0.5, 0.3]);
        (x, y)
    }

    #[test]
    fn solver_ids_round_trip() {
        for id in [
            SolverId::AssRzaNlmf,
            SolverId::NssOmp,
            SolverId::NssBpdn,
            SolverId::OracleExhaustive,
        ] {
            assert_eq!(id.as_str().parse::<SolverId>().unwrap(), id);
        }
        assert_eq!("omp".parse::<SolverId>().unwrap(), SolverId::NssOmp);
        assert!("cosamp".parse::<SolverId>().is_err());
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-1.0, 1.0), 0.0);
    }

    #[test]
    fn omp_zero_observations() {
        let (x, _) = small();
        let r = omp(&x, &DVector::zeros(3), 2, 0.0).unwrap();
        assert_eq!(r.iterations_used, 0);
        assert_eq!(r.estimate, DVector::zeros(5));
    }

    #[test]
    fn omp_rejects_bad_sparsity() {
        let (x, y) = small();
        assert!(matches!(omp(&x, &y, 0, 0.0), Err(Error::InvalidSparsity { .. })));
        assert!(matches!(omp(&x, &y, 4, 0.0), Err(Error::InvalidSparsity { .. })));
    }

    #[test]
    fn omp_residual_orthogonal_and_shrinking() {
        let (x, y) = small();
        let (r, trace) = omp_traced(&x, &y, 2, 0.0).unwrap();
        let residual = &y - &x * &r.estimate;
        for &j in &trace.selected {
            assert!(x.column(j).dot(&residual).abs() < 1e-10);
        }
        assert!(trace.residual_norms.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.estimate.iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn omp_reports_rank_deficiency() {
        // second column is the first one again; the second refit is singular
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let y = DVector::from_column_slice(&[1.0, 1.0]);
        assert!(matches!(omp(&x, &y, 2, 0.0), Err(Error::RankDeficient { iteration: 2 })));
    }

    #[test]
    fn bpdn_zero_observations() {
        let (x, _) = small();
        let r = bpdn_shrinkage(&x, &DVector::zeros(3), &BpdnConfig::default()).unwrap();
        assert_eq!(r.estimate, DVector::zeros(5));
        assert_eq!(r.objective_value, Some(0.0));
    }

    #[test]
    fn bpdn_large_lambda_gives_zero() {
        let (x, y) = small();
        let lambda = x.tr_mul(&y).amax();
        let r = bpdn_shrinkage(&x, &y, &BpdnConfig { lambda, ..Default::default() }).unwrap();
        assert_eq!(r.estimate, DVector::zeros(5));
        // subgradient condition at zero
        assert!(x.tr_mul(&y).amax() <= lambda);
    }

    #[test]
    fn bpdn_objective_trace_non_increasing() {
        let (x, y) = small();
        let (r, trace) = bpdn_shrinkage_traced(&x, &y, &BpdnConfig::default()).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*trace.last().unwrap(), r.objective_value.unwrap());
    }

    #[test]
    fn bpdn_rejects_bad_config() {
        let (x, y) = small();
        for cfg in [
            BpdnConfig { lambda: -1.0, ..Default::default() },
            BpdnConfig { tolerance: 0.0, ..Default::default() },
            BpdnConfig { max_iterations: 0, ..Default::default() },
        ] {
            assert!(bpdn_shrinkage(&x, &y, &cfg).is_err());
        }
    }

    #[test]
    fn spectral_norm_matches_eigen() {
        let (x, _) = small();
        let exact = (x.transpose() * &x).symmetric_eigen().eigenvalues.max();
        assert!((gram_spectral_norm(&x) - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn oracle_empty_support() {
        let (x, y) = small();
        let r = oracle_exhaustive(&x, &y, 0).unwrap();
        assert_eq!(r.estimate, DVector::zeros(5));
        assert_eq!(residual_norm(&x, &y, &r.estimate), y.norm());
    }

    #[test]
    fn oracle_cap() {
        let x = DMatrix::<f64>::identity(40, 40);
        let y = DVector::zeros(40);
        assert!(matches!(
            oracle_exhaustive(&x, &y, 6),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn oracle_never_worse_than_omp() {
        let (x, y) = small();
        for k in 1..=3 {
            let o = oracle_exhaustive(&x, &y, k).unwrap();
            let g = omp(&x, &y, k, 0.0).unwrap();
            assert!(residual_norm(&x, &y, &o.estimate) <= residual_norm(&x, &y, &g.estimate));
        }
    }
}
