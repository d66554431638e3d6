//! Declarative description of a Monte Carlo experiment grid, plus the flat
//! `key = value` config file that can populate it.

use std::path::Path;

use crate::adaptive::{RhoConvention, RzaNlmfConfig};
use crate::baselines::{BpdnConfig, SolverId};
use crate::error::{Error, Result};
use crate::metrics::SnrConvention;
use crate::support::{check_cap, DEFAULT_ENUMERATION_CAP};

/// Trial count the original protocol averages over.
pub const PAPER_TRIALS: usize = 1000;
/// Desk-scale default trial count.
pub const DEFAULT_TRIALS: usize = 200;
/// Reweighted factors swept when picking epsilon.
pub const EPSILON_GRID: [f64; 5] = [2.0, 20.0, 200.0, 2000.0, 20000.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n_dim: usize,
    pub m_dim: usize,
    pub sparsity_levels: Vec<usize>,
    pub snr_grid_db: Vec<f64>,
    /// Reweighted factors for the adaptive solver. Overrides `rza_config.epsilon`.
    pub epsilon_grid: Vec<f64>,
    pub solvers: Vec<SolverId>,
    pub trials: usize,
    pub master_seed: u64,
    pub snr_convention: SnrConvention,
    /// Overrides `rza_config.rho_convention`.
    pub rho_convention: RhoConvention,
    pub rza_config: RzaNlmfConfig,
    pub bpdn_config: BpdnConfig,
    /// Use `sigma_n * sqrt(2 ln N)` for the BPDN weight instead of
    /// `bpdn_config.lambda`.
    pub bpdn_universal_lambda: bool,
    pub omp_residual_tol: f64,
    /// Observations without additive noise.
    pub no_noise: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::comparison()
    }
}

impl ExperimentSpec {
    fn table_one(solvers: Vec<SolverId>, snr_grid_db: Vec<f64>, epsilon_grid: Vec<f64>) -> Self {
        Self {
            n_dim: 40,
            m_dim: 20,
            sparsity_levels: vec![2, 6, 10],
            snr_grid_db,
            epsilon_grid,
            solvers,
            trials: DEFAULT_TRIALS,
            master_seed: 0x5eed,
            snr_convention: SnrConvention::Power10,
            rho_convention: RhoConvention::GradientConsistent,
            rza_config: RzaNlmfConfig::default(),
            bpdn_config: BpdnConfig::default(),
            bpdn_universal_lambda: true,
            omp_residual_tol: 0.0,
            no_noise: false,
        }
    }

    /// Adaptive vs. batch solvers over sparsity and SNR at epsilon = 2000.
    pub fn comparison() -> Self {
        Self::table_one(
            vec![SolverId::AssRzaNlmf, SolverId::NssOmp, SolverId::NssBpdn],
            vec![0.0, 3.0, 6.0, 9.0, 12.0],
            vec![2000.0],
        )
    }

    /// Adaptive solver over the reweighted-factor grid.
    pub fn epsilon_sweep() -> Self {
        Self::table_one(vec![SolverId::AssRzaNlmf], vec![5.0, 10.0], EPSILON_GRID.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_dim == 0 || self.m_dim == 0 {
            return bad(format!("dimensions must be positive, got N={} M={}", self.n_dim, self.m_dim));
        }
        if self.m_dim > self.n_dim {
            return bad(format!("m_dim {} exceeds n_dim {}", self.m_dim, self.n_dim));
        }
        if self.sparsity_levels.is_empty()
            || self.snr_grid_db.is_empty()
            || self.epsilon_grid.is_empty()
            || self.solvers.is_empty()
        {
            return bad("grid lists must be non-empty".into());
        }
        if let Some(&k) = self.sparsity_levels.iter().find(|&&k| k > self.n_dim) {
            return Err(Error::InvalidSparsity { k, n: self.n_dim });
        }
        if let Some(e) = self.epsilon_grid.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("epsilon values must be finite and > 0, got {e}"));
        }
        if let Some(s) = self.snr_grid_db.iter().find(|s| s.is_nan()) {
            return bad(format!("invalid SNR {s}"));
        }
        if self.solvers.contains(&SolverId::OracleExhaustive) {
            for &k in &self.sparsity_levels {
                if k > self.m_dim {
                    return Err(Error::InvalidSparsity { k, n: self.m_dim });
                }
                check_cap(self.n_dim, k, DEFAULT_ENUMERATION_CAP)?;
            }
        }
        self.rza_config.validate()?;
        self.bpdn_config.validate()?;
        Ok(())
    }

    /// Adaptive configuration for one grid epsilon, with the spec-level
    /// conventions applied.
    pub fn rza_for(&self, epsilon: f64) -> RzaNlmfConfig {
        RzaNlmfConfig {
            epsilon,
            rho_convention: self.rho_convention,
            ..self.rza_config
        }
    }

    pub fn n_max(&self) -> usize {
        self.rza_config.effective_n_max(self.m_dim, self.n_dim)
    }

    /// BPDN weight used at the given noise variance.
    pub fn bpdn_lambda(&self, noise_variance: f64) -> f64 {
        if self.bpdn_universal_lambda {
            noise_variance.sqrt() * (2.0 * (self.n_dim as f64).ln()).sqrt()
        } else {
            self.bpdn_config.lambda
        }
    }

    /// Epsilon values that define separate experiments. Without the adaptive
    /// solver the grid collapses to the configured epsilon.
    pub fn effective_epsilons(&self) -> Vec<f64> {
        if self.solvers.contains(&SolverId::AssRzaNlmf) {
            self.epsilon_grid.clone()
        } else {
            vec![self.rza_config.epsilon]
        }
    }

    /// Applies one `key = value` setting. Keys mirror the field names;
    /// nested fields use `rza_config.` / `bpdn_config.` prefixes, and the
    /// adaptive fields are also accepted bare.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key {
            "n_dim" => self.n_dim = parse(value)?,
            "m_dim" => self.m_dim = parse(value)?,
            "sparsity_levels" => self.sparsity_levels = parse_list(value)?,
            "snr_grid_db" => self.snr_grid_db = parse_list(value)?,
            "epsilon_grid" => self.epsilon_grid = parse_list(value)?,
            "solvers" => self.solvers = parse_list(value)?,
            "trials" => self.trials = parse(value)?,
            "master_seed" | "seed" => self.master_seed = parse(value)?,
            "snr_convention" => self.snr_convention = parse(value)?,
            "rho_convention" => self.rho_convention = parse(value)?,
            "no_noise" => self.no_noise = parse(value)?,
            "omp_residual_tol" => self.omp_residual_tol = parse(value)?,
            "bpdn_universal_lambda" => self.bpdn_universal_lambda = parse(value)?,
            "rza_config.mu_iss" | "mu_iss" => self.rza_config.mu_iss = parse(value)?,
            "rza_config.lambda_ass" | "lambda_ass" => self.rza_config.lambda_ass = parse(value)?,
            "rza_config.epsilon" | "epsilon" => self.rza_config.epsilon = parse(value)?,
            "rza_config.zeta" | "zeta" => self.rza_config.zeta = parse(value)?,
            "rza_config.n_max" | "n_max" => {
                self.rza_config.n_max = match value {
                    "auto" | "default" => None,
                    v => Some(parse(v)?),
                }
            }
            "bpdn_config.lambda" => {
                self.bpdn_config.lambda = parse(value)?;
                self.bpdn_universal_lambda = false;
            }
            "bpdn_config.max_iterations" => self.bpdn_config.max_iterations = parse(value)?,
            "bpdn_config.tolerance" => self.bpdn_config.tolerance = parse(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies every setting of a config file's text.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (line, key, value) in parse_config(text)? {
            self.set(&key, &value).map_err(|message| Error::Config { line, message })?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_config_text(&text)
    }
}

fn parse<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse {v:?}: {e}"))
}

/// Comma-separated list, optionally wrapped in brackets.
pub fn parse_list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let inner = v.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

/// Splits config text into `(line_number, key, value)` triples. Blank lines
/// and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                line: idx + 1,
                message: format!("expected `key = value`, got {line:?}"),
            });
        };
        out.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}
