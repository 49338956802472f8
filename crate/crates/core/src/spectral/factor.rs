//! Factorizations `K = V'V` of the PSD joint kernel matrix.

use faer::{Mat, MatRef, Side};
use serde::Serialize;

use crate::error::{Error, Result};

/// Which route produced the factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorPath {
    Cholesky,
    JitteredCholesky,
    EigenFallback,
    PivotedCholesky,
}

/// `factor` is `r x N` with `factor' * factor` reproducing the input.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    pub factor: Mat<f64>,
    /// Sample index owning each factor row (identity for dense routes).
    pub pivots: Vec<usize>,
    pub path: FactorPath,
    /// Diagonal shift added before the successful Cholesky, 0 if none.
    pub jitter: f64,
}

fn trace(k: MatRef<'_, f64>) -> f64 {
    (0..k.nrows()).map(|i| k[(i, i)]).sum()
}

fn psd_tolerance(dim: usize) -> f64 {
    1e-8 * dim as f64
}

/// Plain Cholesky, rejected when a pivot is numerically zero
/// (`L_ii^2 <= 1e-12 * max_i K_ii`).
fn upper_from_llt(k: MatRef<'_, f64>) -> Option<Mat<f64>> {
    let llt = k.llt(Side::Lower).ok()?;
    let l = llt.L();
    let max_diag = (0..k.nrows()).map(|i| k[(i, i)]).fold(0.0, f64::max);
    let floor = PIVOTED_RELATIVE_TOLERANCE * max_diag;
    if (0..l.nrows()).any(|i| l[(i, i)] * l[(i, i)] <= floor) {
        return None;
    }
    Some(l.transpose().to_owned())
}

/// Cholesky, then pivoted Cholesky, then staged jitter, then a clipped
/// eigendecomposition.
///
/// A rank-deficient input (duplicated samples, most commonly) goes to
/// [`pivoted_factor`], which reproduces it to `1e-12 * max_i K_ii`. Jitter
/// would also succeed there, but the differential matrix of identical sets is
/// nilpotent and a shift of `delta` surfaces as eigenvalues near
/// `sqrt(delta)`. Jitter starts at `1e-10 * tr(K) / N` and doubles up to `1e-6 * tr(K) / N`.
/// If every jittered attempt fails the factor is `diag(sqrt(s)) U'` from
/// `K = U diag(s) U'` with negative `s` clipped to zero; an eigenvalue below
/// `-1e-8 * N` is reported as [`Error::NotPsd`].
pub fn psd_factor(k: MatRef<'_, f64>) -> Result<PsdFactor> {
    let dim = k.nrows();
    if k.ncols() != dim {
        return Err(Error::InvalidParameter(
            "factor input must be square".into(),
        ));
    }
    let pivots: Vec<usize> = (0..dim).collect();
    if dim == 0 {
        return Ok(PsdFactor {
            factor: Mat::zeros(0, 0),
            pivots,
            path: FactorPath::Cholesky,
            jitter: 0.0,
        });
    }
    if let Some(v) = upper_from_llt(k) {
        return Ok(PsdFactor {
            factor: v,
            pivots,
            path: FactorPath::Cholesky,
            jitter: 0.0,
        });
    }
    if let Ok(f) = pivoted_factor(k) {
        return Ok(f);
    }

    let scale = trace(k).abs() / dim as f64;
    let ceiling = 1e-6 * scale;
    let mut delta = 1e-10 * scale;
    if delta > 0.0 {
        let mut shifted = k.to_owned();
        let mut applied = 0.0;
        // Small slack so the nominal ceiling itself is attempted.
        while delta <= ceiling * (1.0 + 1e-12) {
            for i in 0..dim {
                shifted[(i, i)] += delta - applied;
            }
            applied = delta;
            if let Some(v) = upper_from_llt(shifted.as_ref()) {
                return Ok(PsdFactor {
                    factor: v,
                    pivots,
                    path: FactorPath::JitteredCholesky,
                    jitter: delta,
                });
            }
            delta *= 2.0;
        }
    }

    eigen_factor(k)
}

/// `diag(sqrt(s)) U'` from `K = U diag(s) U'`, negative `s` clipped to zero.
fn eigen_factor(k: MatRef<'_, f64>) -> Result<PsdFactor> {
    let dim = k.nrows();
    let evd = k
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S();
    let tolerance = psd_tolerance(dim);
    let smallest = (0..dim).map(|i| s[i]).fold(f64::INFINITY, f64::min);
    if smallest < -tolerance {
        return Err(Error::NotPsd {
            eigenvalue: smallest,
            tolerance,
        });
    }
    let u = evd.U();
    let factor = Mat::from_fn(dim, dim, |i, j| s[i].max(0.0).sqrt() * u[(j, i)]);
    Ok(PsdFactor {
        factor,
        pivots: (0..dim).collect(),
        path: FactorPath::EigenFallback,
        jitter: 0.0,
    })
}

/// Relative stopping tolerance of [`pivoted_factor`].
pub const PIVOTED_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Diagonally pivoted (rank-revealing) Cholesky.
///
/// Rows of the factor are added greedily on the largest residual diagonal
/// entry until that entry drops to `1e-12 * max_i K_ii`. The residual
/// `K - V'V` is PSD, so each of its entries is bounded by that value.
pub fn pivoted_factor(k: MatRef<'_, f64>) -> Result<PsdFactor> {
    let dim = k.nrows();
    if k.ncols() != dim {
        return Err(Error::InvalidParameter(
            "factor input must be square".into(),
        ));
    }
    let tolerance = psd_tolerance(dim);
    let mut residual: Vec<f64> = (0..dim).map(|i| k[(i, i)]).collect();
    if let Some(&bad) = residual.iter().find(|&&d| d < -tolerance) {
        return Err(Error::NotPsd {
            eigenvalue: bad,
            tolerance,
        });
    }
    let max_diag = residual.iter().copied().fold(0.0, f64::max);
    let stop = PIVOTED_RELATIVE_TOLERANCE * max_diag;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut pivots = Vec::new();
    let mut chosen = vec![false; dim];
    while rows.len() < dim {
        let (p, &d) = residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen[*i])
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if d <= stop {
            break;
        }
        let pivot = d.sqrt();
        let mut row: Vec<f64> = k.col(p).iter().copied().collect();
        for prev in &rows {
            let coef = prev[p];
            if coef != 0.0 {
                row.iter_mut().zip(prev).for_each(|(r, q)| *r -= coef * q);
            }
        }
        for (j, r) in row.iter_mut().enumerate() {
            if chosen[j] {
                *r = 0.0;
            } else {
                *r /= pivot;
            }
        }
        row[p] = pivot;
        chosen[p] = true;
        for (j, r) in row.iter().enumerate() {
            if !chosen[j] {
                residual[j] -= r * r;
                if residual[j] < -tolerance {
                    return Err(Error::NotPsd {
                        eigenvalue: residual[j],
                        tolerance,
                    });
                }
            }
        }
        residual[p] = 0.0;
        rows.push(row);
        pivots.push(p);
    }

    let rank = rows.len();
    let factor = Mat::from_fn(rank, dim, |i, j| rows[i][j]);
    Ok(PsdFactor {
        factor,
        pivots,
        path: FactorPath::PivotedCholesky,
        jitter: 0.0,
    })
}
