//! Problem instances for compressive sensing: K-sparse signals, Gaussian
//! sensing matrices and noisy measurements `y = W D h + z`.
//!
//! All generators take an explicit random stream, so a trial is fully
//! determined by the stream it is handed. [`MasterSeed`] derives those
//! streams from a `(seed, trial_index)` pair.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::metrics::{snr_to_noise_variance, SnrConvention};
use crate::support::{check_cap, Supports, DEFAULT_ENUMERATION_CAP};

/// A K-sparse coefficient vector together with how it was drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    pub coefficients: DVector<f64>,
    /// Sorted, distinct indices of the nonzero entries.
    pub support: Vec<usize>,
    /// Variance of each nonzero entry (1/K, so that E{|h|^2} = 1).
    pub per_nonzero_variance: f64,
}

impl SparseSignal {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }
}

/// Noise applied by [`synthesize_measurements`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// Additive white Gaussian noise calibrated to a unit-power signal.
    Snr { db: f64, convention: SnrConvention },
    /// Observations are exactly `X h`.
    Noiseless,
}

impl NoiseLevel {
    pub fn snr_db(db: f64) -> Self {
        NoiseLevel::Snr {
            db,
            convention: SnrConvention::Power10,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseLevel::Snr { db, convention } => snr_to_noise_variance(db, convention),
            NoiseLevel::Noiseless => 0.0,
        }
    }
}

/// Measurement matrix, dictionary, their product and the noisy observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingEnsemble {
    /// W, M x N.
    pub measurement_matrix: DMatrix<f64>,
    /// D, N x N orthogonal.
    pub dictionary: DMatrix<f64>,
    /// X = W D.
    pub sensing_matrix: DMatrix<f64>,
    /// y, length M.
    pub observations: DVector<f64>,
    pub noise_variance: f64,
}

impl SensingEnsemble {
    pub fn rows(&self) -> usize {
        self.sensing_matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.sensing_matrix.ncols()
    }
}

/// Identifies the random stream of one Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MasterSeed {
    pub seed: u64,
    pub trial_index: u64,
}

/// Independent streams for the three random ingredients of a trial.
#[derive(Debug, Clone)]
pub struct TrialStreams {
    pub matrix: ChaCha8Rng,
    pub signal: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl MasterSeed {
    pub fn new(seed: u64, trial_index: u64) -> Self {
        Self { seed, trial_index }
    }

    /// The trial's root stream: ChaCha8 keyed by `seed`, stream id `trial_index`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.trial_index);
        rng
    }

    /// Splits the root stream into per-ingredient streams. Drawing a
    /// different sparsity or SNR never shifts the sensing matrix.
    pub fn streams(&self) -> TrialStreams {
        let mut root = self.rng();
        let matrix = ChaCha8Rng::seed_from_u64(root.random());
        let signal = ChaCha8Rng::seed_from_u64(root.random());
        let noise = ChaCha8Rng::seed_from_u64(root.random());
        TrialStreams {
            matrix,
            signal,
            noise,
        }
    }
}

/// Draws a K-sparse vector of length `n`: uniform support without
/// replacement, nonzeros i.i.d. N(0, 1/k). No per-draw renormalization.
pub fn generate_sparse_signal<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<SparseSignal> {
    if n == 0 {
        return Err(Error::InvalidShape("signal length must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidSparsity { k, n });
    }
    let mut coefficients = DVector::zeros(n);
    if k == 0 {
        return Ok(SparseSignal {
            coefficients,
            support: Vec::new(),
            per_nonzero_variance: 0.0,
        });
    }
    let variance = 1.0 / k as f64;
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite positive std");
    let mut support = index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    for &i in &support {
        // a Gaussian draw of exactly 0.0 would break the sparsity count
        let mut v = 0.0;
        while v == 0.0 {
            v = normal.sample(rng);
        }
        coefficients[i] = v;
    }
    Ok(SparseSignal {
        coefficients,
        support,
        per_nonzero_variance: variance,
    })
}

/// Draws an `m x n` matrix with i.i.d. standard normal entries. A row that
/// comes out identically zero is redrawn.
pub fn generate_sensing_matrix<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidShape(format!("sensing matrix must be non-empty, got {m}x{n}")));
    }
    let mut x = DMatrix::zeros(m, n);
    for i in 0..m {
        loop {
            for j in 0..n {
                x[(i, j)] = StandardNormal.sample(rng);
            }
            if x.row(i).iter().any(|&v| v != 0.0) {
                break;
            }
        }
    }
    Ok(x)
}

/// Builds `y = X h + z` with the identity dictionary (`W = X`).
pub fn synthesize_measurements<R: Rng + ?Sized>(
    sensing: &DMatrix<f64>,
    h: &SparseSignal,
    noise: NoiseLevel,
    rng: &mut R,
) -> Result<SensingEnsemble> {
    let n = sensing.ncols();
    synthesize_with_dictionary(sensing, &DMatrix::identity(n, n), h, noise, rng)
}

/// Builds `y = W D h + z` for an orthogonal dictionary `D`.
pub fn synthesize_with_dictionary<R: Rng + ?Sized>(
    measurement: &DMatrix<f64>,
    dictionary: &DMatrix<f64>,
    h: &SparseSignal,
    noise: NoiseLevel,
    rng: &mut R,
) -> Result<SensingEnsemble> {
    let n = measurement.ncols();
    if h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: h.len(),
        });
    }
    if dictionary.nrows() != n || dictionary.ncols() != n {
        return Err(Error::InvalidShape(format!(
            "dictionary must be {n}x{n}, got {}x{}",
            dictionary.nrows(),
            dictionary.ncols()
        )));
    }
    let sensing = if is_identity(dictionary) {
        measurement.clone()
    } else {
        let gram = dictionary.transpose() * dictionary;
        if (gram - DMatrix::identity(n, n)).abs().max() > 1e-10 {
            return Err(Error::InvalidInput("dictionary is not orthogonal".into()));
        }
        measurement * dictionary
    };

    let clean = &sensing * &h.coefficients;
    let noise_variance = noise.variance();
    let observations = match noise {
        NoiseLevel::Noiseless => clean,
        NoiseLevel::Snr { .. } => {
            let sigma = noise_variance.sqrt();
            clean.map(|v| {
                let z: f64 = StandardNormal.sample(rng);
                v + sigma * z
            })
        }
    };

    Ok(SensingEnsemble {
        measurement_matrix: measurement.clone(),
        dictionary: dictionary.clone(),
        sensing_matrix: sensing,
        observations,
        noise_variance,
    })
}

fn is_identity(d: &DMatrix<f64>) -> bool {
    d.is_square()
        && d.iter().enumerate().all(|(idx, &v)| {
            let (i, j) = (idx % d.nrows(), idx / d.nrows());
            v == if i == j { 1.0 } else { 0.0 }
        })
}

/// Options for [`rip_constant_bruteforce`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipOptions {
    /// The matrix is multiplied by this factor before evaluation.
    pub scale: f64,
    pub cap: u128,
}

impl Default for RipOptions {
    fn default() -> Self {
        Self {
            scale: 1.0,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// Exact restricted isometry constant of order `k` by enumerating every
/// size-`k` column support and taking the extreme Gram eigenvalues.
pub fn rip_constant_bruteforce(x: &DMatrix<f64>, k: usize, opts: RipOptions) -> Result<f64> {
    let (m, n) = x.shape();
    if k > m.min(n) {
        return Err(Error::InvalidSparsity { k, n: m.min(n) });
    }
    if k == 0 {
        return Ok(0.0);
    }
    check_cap(n, k, opts.cap)?;
    let scaled = x * opts.scale;
    let mut delta: f64 = 0.0;
    for support in Supports::new(n, k) {
        let sub = scaled.select_columns(&support);
        let gram = sub.transpose() * &sub;
        let eig = SymmetricEigen::new(gram);
        let lo = eig.eigenvalues.min();
        let hi = eig.eigenvalues.max();
        delta = delta.max(1.0 - lo).max(hi - 1.0);
    }
    Ok(delta.max(0.0))
}

/// Renders a matrix as text: a `M N` header line, then one space-separated
/// row per line. Values use the shortest round-trip representation.
pub fn matrix_to_text(x: &DMatrix<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        let row: Vec<String> = x.row(i).iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

/// Parses the format written by [`matrix_to_text`].
pub fn matrix_from_text(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty matrix text".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidInput(format!("bad header {header:?}: {e}")))?;
    let [m, n] = dims[..] else {
        return Err(Error::InvalidInput(format!("header must be \"M N\", got {header:?}")));
    };
    let mut values = Vec::with_capacity(m * n);
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("row {i}: {e}")))?;
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        values.extend(row);
    }
    if values.len() != m * n {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: values.len() / n.max(1),
        });
    }
    Ok(DMatrix::from_row_slice(m, n, &values))
}
