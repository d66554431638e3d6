//! Squared-error metric, SNR conversion and the two Cramer-Rao reference
//! curves (batch recovery and adaptive recovery).

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Denominators closer to zero than this are treated as singular.
const SINGULAR_EPS: f64 = 1e-12;

/// How an SNR in decibels maps to a noise variance for unit signal power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrConvention {
    /// sigma_n^2 = 10^(-snr/10), the usual power ratio.
    #[default]
    Power10,
    /// sigma_n^2 = 10^(-snr/20), the literal "20 log" reading.
    Paper20,
}

impl fmt::Display for SnrConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SnrConvention::Power10 => "power10",
            SnrConvention::Paper20 => "paper20",
        })
    }
}

impl FromStr for SnrConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "power10" => Ok(SnrConvention::Power10),
            "paper20" => Ok(SnrConvention::Paper20),
            other => Err(format!("unknown SNR convention {other:?} (expected power10 or paper20)")),
        }
    }
}

pub fn snr_to_noise_variance(snr_db: f64, convention: SnrConvention) -> f64 {
    match convention {
        SnrConvention::Power10 => 10f64.powf(-snr_db / 10.0),
        SnrConvention::Paper20 => 10f64.powf(-snr_db / 20.0),
    }
}

/// Squared Euclidean distance between the true and estimated vectors.
pub fn mse(truth: &DVector<f64>, estimate: &DVector<f64>) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    Ok(truth.iter().zip(estimate.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Bound for batch recovery with perfectly removed interference: K sigma_n^2 / N.
pub fn crlb_nss(k: usize, n_dim: usize, noise_variance: f64) -> f64 {
    k as f64 * noise_variance / n_dim as f64
}

/// Parameters of the adaptive-recovery reference curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbInputs {
    pub k: usize,
    pub n_dim: usize,
    /// sigma_n^2
    pub noise_variance: f64,
    pub mu_iss: f64,
    /// sigma^2, the per-nonzero coefficient variance (1/K).
    pub coeff_variance: f64,
    /// Zero-attractor gain.
    pub rho: f64,
}

/// The adaptive-recovery reference curve
///
/// ```text
/// 5 mu sn^4 / (9 mu sn^2 s^2 - 2 s^2)  -  rho^2 N K / (27 mu sn^4 - 6 mu sn^2)
/// ```
///
/// with `sn^2` the noise variance and `s^2` the coefficient variance,
/// evaluated with the grouping exactly as written. It is a plotted
/// reference only; the value can be negative at common settings.
pub fn crlb_ass(inputs: &CrlbInputs) -> Result<f64> {
    let CrlbInputs {
        k,
        n_dim,
        noise_variance: sn2,
        mu_iss: mu,
        coeff_variance: s2,
        rho,
    } = *inputs;
    let sn4 = sn2 * sn2;
    let first_den = 9.0 * mu * sn2 * s2 - 2.0 * s2;
    let second_den = 27.0 * mu * sn4 - 6.0 * mu * sn2;
    if first_den.abs() < SINGULAR_EPS {
        return Err(Error::SingularParameters(format!(
            "9*mu*sn2*s2 - 2*s2 = {first_den:e} is numerically zero"
        )));
    }
    if second_den.abs() < SINGULAR_EPS {
        return Err(Error::SingularParameters(format!(
            "27*mu*sn4 - 6*mu*sn2 = {second_den:e} is numerically zero"
        )));
    }
    let first = 5.0 * mu * sn4 / first_den;
    let second = rho * rho * n_dim as f64 * k as f64 / second_den;
    Ok(first - second)
}
