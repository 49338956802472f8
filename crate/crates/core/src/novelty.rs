//! KEN / R-KEN scores and ranked members of each detected novel mode.

use serde::Serialize;

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::kernel::{build_blocks, gaussian_kernel, BandwidthSelection, KernelConfig};
use crate::spectral::oracle::CrossCheck;
use crate::spectral::{
    differential_spectrum, EigenvectorBasis, FactorPath, Factorization, SpectralOptions,
    SpectralResult,
};

/// Name of the generator behind every seeded draw in this crate.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.3)";

/// Sum starting from +0.0, so an empty list gives 0 rather than -0.
fn positive_sum(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |a, b| a + b)
}

/// `sum_i lambda_i ln(S / lambda_i)` with `S = sum_i lambda_i`, in nats.
///
/// Equals `S` times the Shannon entropy of `lambda / S`. An empty list scores 0.
pub fn ken_score(eigenvalues: &[f64]) -> Result<f64> {
    if let Some(&bad) = eigenvalues.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::NonPositiveEigenvalue(bad));
    }
    let total = positive_sum(eigenvalues);
    Ok(eigenvalues
        .iter()
        .map(|&l| l * (total / l).ln())
        .fold(0.0, |a, b| a + b))
}

fn validate_probabilities(p: &[f64], name: &str) -> Result<()> {
    if let Some(bad) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidProbability(format!("{name} has entry {bad}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbability(format!("{name} sums to {sum}")));
    }
    Ok(())
}

/// Evaluates KEN at the exact-frequency eigenvalues `max(omega_i - gamma_i, 0)`
/// two ways: directly, and as `S * H(lambda / S)`.
pub fn conditional_entropy_identity_check(omegas: &[f64], gammas: &[f64]) -> Result<(f64, f64)> {
    if omegas.len() != gammas.len() {
        return Err(Error::InvalidProbability(format!(
            "lengths differ: {} vs {}",
            omegas.len(),
            gammas.len()
        )));
    }
    validate_probabilities(omegas, "omega")?;
    validate_probabilities(gammas, "gamma")?;
    let lambdas: Vec<f64> = omegas
        .iter()
        .zip(gammas)
        .map(|(w, g)| (w - g).max(0.0))
        .filter(|&l| l > 0.0)
        .collect();
    let ken = ken_score(&lambdas)?;
    let total = positive_sum(&lambdas);
    let entropy: f64 = if total > 0.0 {
        -lambdas
            .iter()
            .map(|l| l / total)
            .map(|p| p * p.ln())
            .sum::<f64>()
    } else {
        0.0
    };
    Ok((ken, total * entropy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedSample {
    pub index: usize,
    pub score: f64,
}

/// One detected mode: its eigenvalue and the samples with the largest
/// entries in its eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub rank: usize,
    pub eigenvalue: f64,
    /// Test samples, index in `[0, n)`.
    pub top_test: Vec<RankedSample>,
    /// Reference samples, index in the joint coordinate range `[n, n + m)`
    /// (subtract `n` for the reference row).
    pub top_ref: Vec<RankedSample>,
}

fn top_entries(values: &[f64], offset: usize, take: usize) -> Vec<RankedSample> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(take)
        .map(|i| RankedSample {
            index: offset + i,
            score: values[i],
        })
        .collect()
}

/// Ranks samples by their entry in each leading eigenvector.
///
/// Requests beyond what is available are clamped; each clamp adds a warning.
pub fn extract_modes(
    spectrum: &SpectralResult,
    top_k: usize,
    top_r: usize,
) -> (Vec<ModeSummary>, Vec<String>) {
    let (n, m) = (spectrum.n, spectrum.m);
    let mut warnings = Vec::new();
    let available = spectrum.eigenvectors.len();
    let modes = top_k.min(available);
    if top_k > available {
        warnings.push(format!(
            "top_k={top_k} clamped to {available} available mode(s)"
        ));
    }
    if top_r > n || top_r > m {
        warnings.push(format!(
            "top_r={top_r} clamped to {} test and {} reference sample(s)",
            top_r.min(n),
            top_r.min(m)
        ));
    }
    let summaries = spectrum
        .eigenvectors
        .iter()
        .zip(&spectrum.eigenvalues_positive)
        .take(modes)
        .enumerate()
        .map(|(i, (u, &eigenvalue))| ModeSummary {
            rank: i + 1,
            eigenvalue,
            top_test: top_entries(&u[..n], 0, top_r.min(n)),
            top_ref: top_entries(&u[n..], n, top_r.min(m)),
        })
        .collect();
    (summaries, warnings)
}

/// Membership score of an arbitrary point in the mode described by `u`:
/// `sum_j u_j k(x_j, point) + sum_s u_{n+s} k(y_s, point)`.
pub fn cluster_score(
    test: &EmbeddingSet,
    reference: &EmbeddingSet,
    sigma: f64,
    u: &[f64],
    point: &[f64],
) -> Result<f64> {
    let n = test.count();
    if u.len() != n + reference.count() {
        return Err(Error::DimensionMismatch(u.len(), n + reference.count()));
    }
    let mut score = 0.0;
    for (j, x) in test.rows().enumerate() {
        score += u[j] * gaussian_kernel(x, point, sigma)?;
    }
    for (s, y) in reference.rows().enumerate() {
        score += u[n + s] * gaussian_kernel(y, point, sigma)?;
    }
    Ok(score)
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub spectral: SpectralOptions,
    pub top_k: usize,
    pub top_r: usize,
    /// Also score the reference against the test set.
    pub rken: bool,
    /// Recorded in the report; evaluation itself draws no random numbers.
    pub seed: Option<u64>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            spectral: SpectralOptions::default(),
            top_k: 3,
            top_r: 10,
            rken: false,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub cutoff_abs: f64,
    pub cutoff_rel: f64,
    pub jitter: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub factorization: Factorization,
    pub factor_path: FactorPath,
    pub factor_rank: usize,
    pub cutoff_used: f64,
    pub eigenvector_basis: EigenvectorBasis,
    pub rken_factor_path: Option<FactorPath>,
    pub rng: &'static str,
    pub warnings: Vec<String>,
    pub bandwidth_selection: Option<BandwidthSelection>,
    pub oracle: Option<CrossCheck>,
}

/// Everything one scoring run produces. Serializes to the documented JSON
/// report layout, with run details under `metadata`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoveltyReport {
    pub eta: f64,
    pub sigma: f64,
    pub n: usize,
    pub m: usize,
    pub eigenvalues_positive: Vec<f64>,
    pub sum_positive: f64,
    pub ken: f64,
    pub rken: Option<f64>,
    pub modes: Vec<ModeSummary>,
    pub config: ReportConfig,
    pub metadata: ReportMetadata,
}

impl NoveltyReport {
    pub fn summary_line(&self) -> String {
        format!(
            "KEN={} k'={} S={}",
            self.ken,
            self.eigenvalues_positive.len(),
            self.sum_positive
        )
    }
}

/// KEN of `test` against `reference`, plus the leading novel modes.
pub fn evaluate(
    test: &EmbeddingSet,
    reference: &EmbeddingSet,
    config: &KernelConfig,
    options: &EvaluateOptions,
) -> Result<NoveltyReport> {
    config.validate()?;
    if options.top_k == 0 || options.top_r == 0 {
        return Err(Error::InvalidParameter(
            "top_k and top_r must be positive".into(),
        ));
    }
    let spectral = SpectralOptions {
        max_eigenvectors: Some(options.top_k),
        ..options.spectral.clone()
    };
    let spectrum = {
        let blocks = build_blocks(test, reference, config)?;
        differential_spectrum(&blocks, config.eta, &spectral)?
    };
    let ken = ken_score(&spectrum.eigenvalues_positive)?;
    let (modes, warnings) = extract_modes(&spectrum, options.top_k, options.top_r);

    let (rken, rken_factor_path) = if options.rken {
        let swapped = build_blocks(reference, test, config)?;
        let reverse = differential_spectrum(
            &swapped,
            config.eta,
            &SpectralOptions {
                max_eigenvectors: Some(0),
                ..options.spectral.clone()
            },
        )?;
        (
            Some(ken_score(&reverse.eigenvalues_positive)?),
            Some(reverse.factor_path),
        )
    } else {
        (None, None)
    };

    Ok(NoveltyReport {
        eta: config.eta,
        sigma: config.sigma,
        n: test.count(),
        m: reference.count(),
        sum_positive: positive_sum(&spectrum.eigenvalues_positive),
        eigenvalues_positive: spectrum.eigenvalues_positive,
        ken,
        rken,
        modes,
        config: ReportConfig {
            cutoff_abs: options.spectral.cutoff_abs,
            cutoff_rel: options.spectral.cutoff_rel,
            jitter: spectrum.jitter,
            seed: options.seed,
        },
        metadata: ReportMetadata {
            factorization: options.spectral.factorization,
            factor_path: spectrum.factor_path,
            factor_rank: spectrum.factor_rank,
            cutoff_used: spectrum.cutoff_used,
            eigenvector_basis: options.spectral.basis,
            rken_factor_path,
            rng: RNG_NAME,
            warnings,
            bandwidth_selection: None,
            oracle: None,
        },
    })
}
