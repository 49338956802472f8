//! Normalized Gaussian kernel blocks and bandwidth selection.

use faer::{Mat, MatRef};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::novelty::ken_score;
use crate::spectral::{differential_spectrum, SpectralOptions};

/// Bandwidth `sigma` of the Gaussian kernel and the novelty ratio `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConfig {
    pub sigma: f64,
    pub eta: f64,
}

impl KernelConfig {
    pub fn new(sigma: f64, eta: f64) -> Result<Self> {
        let config = Self { sigma, eta };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.eta.is_finite() && self.eta >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must be at least 1, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(x.len(), y.len()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {sigma}"
        )));
    }
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-sq / (2.0 * sigma * sigma)).exp())
}

/// The three normalized kernel blocks of a test set `X` (n rows) and a
/// reference set `Y` (m rows):
///
/// * `kxx = k(x_i, x_j) / n`
/// * `kyy = k(y_i, y_j) / m`
/// * `kxy = k(x_i, y_j) / sqrt(n m)`
#[derive(Debug, Clone)]
pub struct KernelBlocks {
    kxx: Mat<f64>,
    kyy: Mat<f64>,
    kxy: Mat<f64>,
}

impl KernelBlocks {
    /// Assembles blocks from raw (unnormalized) kernel matrices.
    pub fn from_raw(kxx: Mat<f64>, kyy: Mat<f64>, kxy: Mat<f64>) -> Result<Self> {
        let (n, m) = (kxx.nrows(), kyy.nrows());
        if kxx.ncols() != n || kyy.ncols() != m || kxy.nrows() != n || kxy.ncols() != m {
            return Err(Error::InvalidParameter(
                "inconsistent kernel block shapes".into(),
            ));
        }
        let (fn_, fm, fnm) = (n as f64, m as f64, ((n * m) as f64).sqrt());
        Ok(Self {
            kxx: Mat::from_fn(n, n, |i, j| kxx[(i, j)] / fn_),
            kyy: Mat::from_fn(m, m, |i, j| kyy[(i, j)] / fm),
            kxy: Mat::from_fn(n, m, |i, j| kxy[(i, j)] / fnm),
        })
    }

    pub fn n(&self) -> usize {
        self.kxx.nrows()
    }

    pub fn m(&self) -> usize {
        self.kyy.nrows()
    }

    pub fn kxx(&self) -> MatRef<'_, f64> {
        self.kxx.as_ref()
    }

    pub fn kyy(&self) -> MatRef<'_, f64> {
        self.kyy.as_ref()
    }

    pub fn kxy(&self) -> MatRef<'_, f64> {
        self.kxy.as_ref()
    }

    /// Mutable access for fault-injection in verification harnesses.
    #[doc(hidden)]
    pub fn kxy_mut(&mut self) -> faer::MatMut<'_, f64> {
        self.kxy.as_mut()
    }
}

fn sq_norms(set: &EmbeddingSet) -> Vec<f64> {
    set.rows().map(|r| r.iter().map(|v| v * v).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric block with each unordered pair evaluated once (as `(min, max)`)
/// so that the mirror entries are bitwise equal.
fn symmetric_block(
    set: &EmbeddingSet,
    scale: f64,
    diagonal: Option<f64>,
    entry: impl Fn(usize, usize) -> f64,
) -> Mat<f64> {
    let n = set.count();
    Mat::from_fn(n, n, |i, j| match (i == j, diagonal) {
        (true, Some(d)) => d * scale,
        _ => entry(i.min(j), i.max(j)) * scale,
    })
}

pub(crate) fn assemble_blocks(
    test: &EmbeddingSet,
    reference: &EmbeddingSet,
    unit_diagonal: bool,
    entry: impl Fn(&[f64], f64, &[f64], f64) -> f64,
) -> Result<KernelBlocks> {
    if test.dim() != reference.dim() {
        return Err(Error::DimensionMismatch(test.dim(), reference.dim()));
    }
    let (n, m) = (test.count(), reference.count());
    let (xn, yn) = (sq_norms(test), sq_norms(reference));
    let diagonal = unit_diagonal.then_some(1.0);
    let kxx = symmetric_block(test, 1.0 / n as f64, diagonal, |i, j| {
        entry(test.row(i), xn[i], test.row(j), xn[j])
    });
    let kyy = symmetric_block(reference, 1.0 / m as f64, diagonal, |i, j| {
        entry(reference.row(i), yn[i], reference.row(j), yn[j])
    });
    let cross = 1.0 / ((n * m) as f64).sqrt();
    let kxy = Mat::from_fn(n, m, |i, j| {
        entry(test.row(i), xn[i], reference.row(j), yn[j]) * cross
    });
    Ok(KernelBlocks { kxx, kyy, kxy })
}

/// Normalized Gaussian kernel blocks.
///
/// Squared distances use `|x|^2 + |y|^2 - 2 x.y`, clamped at zero; diagonal
/// entries of `kxx` and `kyy` are written as exactly `1/n` and `1/m`.
pub fn build_blocks(
    test: &EmbeddingSet,
    reference: &EmbeddingSet,
    config: &KernelConfig,
) -> Result<KernelBlocks> {
    config.validate()?;
    let gamma = 1.0 / (2.0 * config.sigma * config.sigma);
    assemble_blocks(test, reference, true, |x, xn, y, yn| {
        let sq = (xn + yn - 2.0 * dot(x, y)).max(0.0);
        (-sq * gamma).exp()
    })
}

/// Linear-kernel blocks `k(x, y) = x.y` with the same normalizations.
pub fn build_linear_blocks(test: &EmbeddingSet, reference: &EmbeddingSet) -> Result<KernelBlocks> {
    assemble_blocks(test, reference, false, |x, _, y, _| dot(x, y))
}

/// Knobs of the subsample-variance bandwidth rule.
#[derive(Debug, Clone)]
pub struct BandwidthSearch {
    /// Ascending candidate bandwidths.
    pub candidates: Vec<f64>,
    pub variance_threshold: f64,
    pub subsample_fraction: f64,
    pub trials: usize,
    pub seed: u64,
    pub eta: f64,
    pub spectral: SpectralOptions,
}

impl Default for BandwidthSearch {
    fn default() -> Self {
        Self {
            candidates: vec![0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0],
            variance_threshold: 0.01,
            subsample_fraction: 0.5,
            trials: 10,
            seed: 0,
            eta: 1.0,
            spectral: SpectralOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateStats {
    pub sigma: f64,
    pub mean_ken: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthSelection {
    pub sigma: f64,
    /// False when no candidate met the threshold and the largest was returned.
    pub satisfied: bool,
    pub variance_threshold: f64,
    pub trials: usize,
    pub subsample_fraction: f64,
    pub candidates: Vec<CandidateStats>,
}

fn subsample_size(count: usize, fraction: f64) -> Result<usize> {
    let size = ((count as f64) * fraction).round() as usize;
    let size = size.min(count);
    if size < 2 {
        return Err(Error::SubsampleTooSmall(size));
    }
    Ok(size)
}

fn sample_variance(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64
}

/// Smallest candidate bandwidth whose KEN score is stable across random
/// subsamples.
///
/// The same `trials` subsample pairs (drawn without replacement) are reused
/// for every candidate, so candidates are compared on identical data.
pub fn select_bandwidth(
    test: &EmbeddingSet,
    reference: &EmbeddingSet,
    search: &BandwidthSearch,
) -> Result<BandwidthSelection> {
    if search.candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate bandwidths".into()));
    }
    if search.candidates.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(
            "candidate bandwidths must be strictly ascending".into(),
        ));
    }
    if search.trials < 2 {
        return Err(Error::InvalidParameter(
            "at least 2 trials are required".into(),
        ));
    }
    if !(search.subsample_fraction > 0.0 && search.subsample_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "subsample fraction must be in (0, 1], got {}",
            search.subsample_fraction
        )));
    }
    if test.dim() != reference.dim() {
        return Err(Error::DimensionMismatch(test.dim(), reference.dim()));
    }
    let n_sub = subsample_size(test.count(), search.subsample_fraction)?;
    let m_sub = subsample_size(reference.count(), search.subsample_fraction)?;

    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let mut pairs = Vec::with_capacity(search.trials);
    for _ in 0..search.trials {
        let xi = index::sample(&mut rng, test.count(), n_sub).into_vec();
        let yi = index::sample(&mut rng, reference.count(), m_sub).into_vec();
        pairs.push((test.select(&xi)?, reference.select(&yi)?));
    }

    let spectral = SpectralOptions {
        max_eigenvectors: Some(0),
        ..search.spectral.clone()
    };
    let mut stats = Vec::with_capacity(search.candidates.len());
    for &sigma in &search.candidates {
        let config = KernelConfig::new(sigma, search.eta)?;
        let mut kens = Vec::with_capacity(pairs.len());
        for (x, y) in &pairs {
            let blocks = build_blocks(x, y, &config)?;
            let spectrum = differential_spectrum(&blocks, config.eta, &spectral)?;
            kens.push(ken_score(&spectrum.eigenvalues_positive)?);
        }
        let variance = sample_variance(&kens);
        let mean_ken = kens.iter().sum::<f64>() / kens.len() as f64;
        stats.push(CandidateStats {
            sigma,
            mean_ken,
            variance,
        });
        if variance < search.variance_threshold {
            return Ok(BandwidthSelection {
                sigma,
                satisfied: true,
                variance_threshold: search.variance_threshold,
                trials: search.trials,
                subsample_fraction: search.subsample_fraction,
                candidates: stats,
            });
        }
    }
    Ok(BandwidthSelection {
        sigma: *search.candidates.last().unwrap(),
        satisfied: false,
        variance_threshold: search.variance_threshold,
        trials: search.trials,
        subsample_fraction: search.subsample_fraction,
        candidates: stats,
    })
}
