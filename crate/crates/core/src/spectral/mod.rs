//! Spectrum of the eta-differential kernel matrix
//!
//! ```text
//! K_{X|eta Y} = [  K_XX            sqrt(eta) K_XY ]
//!               [ -sqrt(eta) K_XY'   -eta K_YY     ]
//! ```
//!
//! computed without a non-symmetric eigensolve. The joint kernel matrix
//! `K_{X,eta Y}` (same blocks, all signs positive) is PSD, so it factors as
//! `V'V`. With `D = diag(+1 x n, -1 x m)` we have `K_{X|eta Y} = D V'V`,
//! whose nonzero eigenvalues are those of the symmetric `Gamma = V D V'`.
//! An eigenvector `w` of `Gamma` maps to the eigenvector `u = D V' w` of
//! `K_{X|eta Y}` with the same eigenvalue.

mod factor;
pub mod oracle;

use faer::{Mat, MatRef, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelBlocks;

pub use factor::{pivoted_factor, psd_factor, FactorPath, PsdFactor};

pub const DEFAULT_CUTOFF_ABS: f64 = 1e-10;
pub const DEFAULT_CUTOFF_REL: f64 = 1e-8;

/// How the joint kernel matrix is factored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Factorization {
    /// Full Cholesky with staged jitter, then an eigendecomposition fallback.
    #[default]
    Dense,
    /// Diagonally pivoted Cholesky, stopped once the largest residual
    /// diagonal entry is below `1e-12` times the largest diagonal entry.
    /// `Gamma` shrinks to `rank x rank`.
    Pivoted,
}

/// Which eigenvectors are reported for each positive eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenvectorBasis {
    /// `u = D V' w`, an eigenvector of `K_{X|eta Y}` over the n+m samples.
    #[default]
    Recovered,
    /// `w` itself, an eigenvector of `Gamma`. Coordinate `k` belongs to the
    /// sample that produced row `k` of the factor.
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralOptions {
    pub cutoff_abs: f64,
    pub cutoff_rel: f64,
    pub factorization: Factorization,
    pub basis: EigenvectorBasis,
    /// Number of leading eigenvectors to compute; `None` means all positive.
    pub max_eigenvectors: Option<usize>,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            cutoff_abs: DEFAULT_CUTOFF_ABS,
            cutoff_rel: DEFAULT_CUTOFF_REL,
            factorization: Factorization::Dense,
            basis: EigenvectorBasis::Recovered,
            max_eigenvectors: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// All n+m eigenvalues, descending. Directions outside the factor's
    /// range contribute exact zeros.
    pub eigenvalues_all: Vec<f64>,
    /// Eigenvalues strictly above `cutoff_used`, descending.
    pub eigenvalues_positive: Vec<f64>,
    /// Unit eigenvectors (length n+m) for the leading positive eigenvalues,
    /// sign-fixed so their first n entries sum to a nonnegative value.
    pub eigenvectors: Vec<Vec<f64>>,
    pub cutoff_used: f64,
    pub n: usize,
    pub m: usize,
    pub eta: f64,
    pub basis: EigenvectorBasis,
    pub factor_path: FactorPath,
    pub jitter: f64,
    pub factor_rank: usize,
}

/// `[[K_XX, sqrt(eta) K_XY], [sqrt(eta) K_XY', eta K_YY]]`.
pub fn joint_kernel(blocks: &KernelBlocks, eta: f64) -> Mat<f64> {
    signed_joint(blocks, eta, 1.0)
}

/// The non-symmetric eta-differential kernel matrix.
pub fn differential_kernel_matrix(blocks: &KernelBlocks, eta: f64) -> Mat<f64> {
    signed_joint(blocks, eta, -1.0)
}

fn signed_joint(blocks: &KernelBlocks, eta: f64, lower_sign: f64) -> Mat<f64> {
    let (n, m) = (blocks.n(), blocks.m());
    let (kxx, kyy, kxy) = (blocks.kxx(), blocks.kyy(), blocks.kxy());
    let root = eta.sqrt();
    Mat::from_fn(n + m, n + m, |i, j| match (i < n, j < n) {
        (true, true) => kxx[(i, j)],
        (true, false) => root * kxy[(i, j - n)],
        (false, true) => lower_sign * root * kxy[(j, i - n)],
        (false, false) => lower_sign * eta * kyy[(i - n, j - n)],
    })
}

/// Flips `u` so that its first `n` entries have a nonnegative sum
/// (a zero sum counts as positive).
pub fn apply_sign_rule(u: &mut [f64], n: usize) {
    let head: f64 = u[..n].iter().sum();
    if head < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
}

/// `Gamma = V D V'` for a factor whose columns are the n+m samples.
fn gamma_matrix(v: MatRef<'_, f64>, n: usize) -> Mat<f64> {
    let vx = v.subcols(0, n);
    let vy = v.subcols(n, v.ncols() - n);
    let mut gamma = vx * vx.transpose() - vy * vy.transpose();
    let r = gamma.nrows();
    for j in 0..r {
        for i in (j + 1)..r {
            let avg = 0.5 * (gamma[(i, j)] + gamma[(j, i)]);
            gamma[(i, j)] = avg;
            gamma[(j, i)] = avg;
        }
    }
    gamma
}

pub fn positive_cutoff(lambda_max: f64, cutoff_abs: f64, cutoff_rel: f64) -> f64 {
    if lambda_max > 0.0 {
        cutoff_abs.max(cutoff_rel * lambda_max)
    } else {
        cutoff_abs
    }
}

/// Eigen-decomposes the eta-differential kernel matrix through the joint
/// kernel factorization.
pub fn differential_spectrum(
    blocks: &KernelBlocks,
    eta: f64,
    options: &SpectralOptions,
) -> Result<SpectralResult> {
    if !(eta.is_finite() && eta >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must be at least 1, got {eta}"
        )));
    }
    let (n, m) = (blocks.n(), blocks.m());
    let joint = joint_kernel(blocks, eta);
    let factor = match options.factorization {
        Factorization::Dense => psd_factor(joint.as_ref())?,
        Factorization::Pivoted => pivoted_factor(joint.as_ref())?,
    };
    drop(joint);

    let v = factor.factor.as_ref();
    let rank = v.nrows();
    let gamma = gamma_matrix(v, n);

    let wanted = options.max_eigenvectors.unwrap_or(usize::MAX);
    // faer returns ascending order.
    let (ascending, vectors) = if rank == 0 {
        (Vec::new(), None)
    } else if wanted == 0 {
        let values = gamma
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        (values, None)
    } else {
        let evd = gamma
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let values = (0..rank).map(|i| evd.S()[i]).collect::<Vec<_>>();
        (values, Some(evd.U().to_owned()))
    };
    drop(gamma);

    let mut eigenvalues_all: Vec<f64> = ascending.iter().rev().copied().collect();
    eigenvalues_all.resize(n + m, 0.0);
    eigenvalues_all.sort_by(|a, b| b.total_cmp(a));

    let lambda_max = ascending.last().copied().unwrap_or(0.0);
    let cutoff_used = positive_cutoff(lambda_max, options.cutoff_abs, options.cutoff_rel);
    let eigenvalues_positive: Vec<f64> = ascending
        .iter()
        .rev()
        .copied()
        .take_while(|&l| l > cutoff_used)
        .collect();

    let mut eigenvectors = Vec::new();
    if let Some(u_gamma) = vectors {
        let count = eigenvalues_positive.len().min(wanted);
        // Leading eigenvectors of Gamma, largest eigenvalue first.
        let w = Mat::from_fn(rank, count, |i, k| u_gamma[(i, rank - 1 - k)]);
        let recovered = match options.basis {
            EigenvectorBasis::Recovered => Some(v.transpose() * &w),
            EigenvectorBasis::Gamma => None,
        };
        for k in 0..count {
            let mut u = vec![0.0; n + m];
            match &recovered {
                Some(vt_w) => {
                    for (j, uj) in u.iter_mut().enumerate() {
                        let sign = if j < n { 1.0 } else { -1.0 };
                        *uj = sign * vt_w[(j, k)];
                    }
                }
                None => {
                    for row in 0..rank {
                        u[factor.pivots[row]] = w[(row, k)];
                    }
                }
            }
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                u.iter_mut().for_each(|x| *x /= norm);
            }
            apply_sign_rule(&mut u, n);
            eigenvectors.push(u);
        }
    }

    Ok(SpectralResult {
        eigenvalues_all,
        eigenvalues_positive,
        eigenvectors,
        cutoff_used,
        n,
        m,
        eta,
        basis: options.basis,
        factor_path: factor.path,
        jitter: factor.jitter,
        factor_rank: rank,
    })
}

#[cfg(test)]
mod tests;
