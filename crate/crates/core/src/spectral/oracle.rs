//! Independent cross-checks of [`differential_spectrum`].
//!
//! * [`oracle_nonsymmetric`] assembles the non-symmetric differential kernel
//!   matrix and runs a general eigenvalue solver on it directly (Householder
//!   reduction to Hessenberg form, then Francis double-shift QR). It shares
//!   no linear algebra with the factor-based path.
//! * [`oracle_linear_feature`] uses the linear kernel, whose feature map is
//!   the identity, and diagonalizes the `d x d` covariance difference
//!   `X'X / n - eta Y'Y / m` explicitly.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
use serde::Serialize;

use super::{differential_kernel_matrix, differential_spectrum, SpectralOptions};
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::kernel::{build_blocks, build_linear_blocks, KernelBlocks, KernelConfig};

/// Largest dimension accepted by [`oracle_linear_feature`].
pub const LINEAR_ORACLE_MAX_DIM: usize = 64;

/// Eigenvalues of the non-symmetric eta-differential kernel matrix, sorted by
/// real part descending.
pub fn oracle_nonsymmetric(blocks: &KernelBlocks, eta: f64) -> Result<Vec<Complex64>> {
    let k = differential_kernel_matrix(blocks, eta);
    let mut values = general_eigenvalues(k.as_ref())?;
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(values)
}

/// Eigenvalues of `X'X / n - eta Y'Y / m`, descending.
pub fn oracle_linear_feature(
    test: &EmbeddingSet,
    reference: &EmbeddingSet,
    eta: f64,
) -> Result<Vec<f64>> {
    let d = test.dim();
    if reference.dim() != d {
        return Err(Error::DimensionMismatch(d, reference.dim()));
    }
    if d > LINEAR_ORACLE_MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "linear-feature oracle supports d <= {LINEAR_ORACLE_MAX_DIM}, got {d}"
        )));
    }
    let (n, m) = (test.count() as f64, reference.count() as f64);
    let mut cov = Mat::<f64>::zeros(d, d);
    for x in test.rows() {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += x[a] * x[b] / n;
            }
        }
    }
    for y in reference.rows() {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] -= eta * y[a] * y[b] / m;
            }
        }
    }
    let mut values = cov
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    values.reverse();
    Ok(values)
}

/// General real eigenvalue problem, eigenvalues only.
pub fn general_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidParameter(
            "eigenvalue input must be square".into(),
        ));
    }
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).collect())
        .collect();
    hessenberg(&mut h);
    hessenberg_qr(h)
}

/// Householder similarity reduction to upper Hessenberg form, in place.
fn hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let f = (m..=high).rev().map(|i| ort[i] * h[i][j]).sum::<f64>() / hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut().take(high + 1) {
            let f = (m..=high).rev().map(|j| ort[j] * row[j]).sum::<f64>() / hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (EISPACK `hqr`
/// lineage, with the exceptional shifts used by JAMA).
fn hessenberg_qr(mut h: Vec<Vec<f64>>) -> Result<Vec<Complex64>> {
    let nn = h.len();
    let mut re = vec![0.0; nn];
    let mut im = vec![0.0; nn];
    if nn == 0 {
        return Ok(Vec::new());
    }
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut x, mut y, mut w, mut s, mut z);

    let mut norm = 0.0;
    for (i, row) in h.iter().enumerate() {
        for v in &row[i.saturating_sub(1)..nn] {
            norm += v.abs();
        }
    }

    let mut n = nn as isize - 1;
    let low: isize = 0;
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let max_total = 60 * nn.max(1);

    macro_rules! at {
        ($i:expr, $j:expr) => {
            h[($i) as usize][($j) as usize]
        };
    }

    while n >= low {
        // Look for a single small subdiagonal element.
        let mut l = n;
        while l > low {
            s = at!(l - 1, l - 1).abs() + at!(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if at!(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            at!(n, n) += exshift;
            re[n as usize] = at!(n, n);
            im[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots found.
            w = at!(n, n - 1) * at!(n - 1, n);
            p = (at!(n - 1, n - 1) - at!(n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            at!(n, n) += exshift;
            at!(n - 1, n - 1) += exshift;
            x = at!(n, n);
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                re[(n - 1) as usize] = x + z;
                re[n as usize] = re[(n - 1) as usize];
                if z != 0.0 {
                    re[n as usize] = x - w / z;
                }
                im[(n - 1) as usize] = 0.0;
                im[n as usize] = 0.0;
            } else {
                re[(n - 1) as usize] = x + p;
                re[n as usize] = x + p;
                im[(n - 1) as usize] = z;
                im[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = at!(n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = at!(n - 1, n - 1);
                w = at!(n, n - 1) * at!(n - 1, n);
            }

            // Exceptional shifts break cycles.
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    at!(i, i) -= x;
                }
                s = at!(n, n - 1).abs() + at!(n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        at!(i, i) -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total_iter += 1;
            if total_iter > max_total {
                return Err(Error::Eigensolver(format!(
                    "QR iteration did not converge after {total_iter} sweeps"
                )));
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = n - 2;
            while m >= l {
                z = at!(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / at!(m + 1, m) + at!(m, m + 1);
                q = at!(m + 1, m + 1) - z - r - s;
                r = at!(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if at!(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs() * (at!(m - 1, m - 1).abs() + z.abs() + at!(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                at!(i, i - 2) = 0.0;
                if i > m + 2 {
                    at!(i, i - 3) = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = at!(k, k - 1);
                    q = at!(k + 1, k - 1);
                    r = if notlast { at!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        at!(k, k - 1) = -s * x;
                    } else if l != m {
                        at!(k, k - 1) = -at!(k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn as isize {
                        p = at!(k, j) + q * at!(k + 1, j);
                        if notlast {
                            p += r * at!(k + 2, j);
                            at!(k + 2, j) -= p * z;
                        }
                        at!(k, j) -= p * x;
                        at!(k + 1, j) -= p * y;
                    }
                    let top = n.min(k + 3);
                    for i in 0..=top {
                        p = x * at!(i, k) + y * at!(i, k + 1);
                        if notlast {
                            p += z * at!(i, k + 2);
                            at!(i, k + 2) -= p * r;
                        }
                        at!(i, k) -= p;
                        at!(i, k + 1) -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    Ok(re
        .into_iter()
        .zip(im)
        .map(|(a, b)| Complex64::new(a, b))
        .collect())
}

/// Outcome of comparing the factor-based spectrum with the oracles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    /// Positive eigenvalues from the factor-based path.
    pub positive: Vec<f64>,
    /// Largest |difference| against the non-symmetric solver's real parts.
    pub nonsymmetric_deviation: f64,
    /// Largest |imaginary part| among the non-symmetric eigenvalues that
    /// pair with retained positive eigenvalues.
    pub max_imaginary: f64,
    /// Largest |difference| between the linear-kernel factor path and the
    /// explicit feature-space covariance, when the dimension allows it.
    pub linear_deviation: Option<f64>,
    /// Largest eigenvector residual `|K u - lambda u| / (1 + |lambda|)`.
    pub max_residual: f64,
}

impl CrossCheck {
    pub fn max_deviation(&self) -> f64 {
        self.nonsymmetric_deviation
            .max(self.linear_deviation.unwrap_or(0.0))
    }
}

/// Compares the leading eigenvalues of `other` against `positive`
/// elementwise and against zero beyond it, returning the worst gap.
fn deviation_against(positive: &[f64], other: &[f64], cutoff: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &p) in positive.iter().enumerate() {
        let o = other.get(i).copied().unwrap_or(0.0);
        worst = worst.max((p - o).abs());
    }
    // Anything else the oracle calls positive must be below the cutoff.
    for &o in other.iter().skip(positive.len()) {
        if o > cutoff {
            worst = worst.max(o - cutoff);
        }
    }
    worst
}

/// Largest `|K u - lambda u|_2 / (1 + |lambda|)` over the retained pairs,
/// applying `K_{X|eta Y}` block by block.
pub fn eigenvector_residual(
    blocks: &KernelBlocks,
    eta: f64,
    spectrum: &super::SpectralResult,
) -> f64 {
    let (n, m) = (blocks.n(), blocks.m());
    let count = spectrum.eigenvectors.len();
    if count == 0 {
        return 0.0;
    }
    let u = Mat::from_fn(n + m, count, |i, k| spectrum.eigenvectors[k][i]);
    let (ux, uy) = (u.subrows(0, n), u.subrows(n, m));
    let root = eta.sqrt();
    let (xx, xy) = (blocks.kxx() * ux, blocks.kxy() * uy);
    let (yx, yy) = (blocks.kxy().transpose() * ux, blocks.kyy() * uy);
    let mut worst: f64 = 0.0;
    for (k, &lambda) in spectrum.eigenvalues_positive.iter().take(count).enumerate() {
        let mut sq = 0.0;
        for i in 0..n {
            let d = xx[(i, k)] + root * xy[(i, k)] - lambda * ux[(i, k)];
            sq += d * d;
        }
        for i in 0..m {
            let d = -root * yx[(i, k)] - eta * yy[(i, k)] - lambda * uy[(i, k)];
            sq += d * d;
        }
        worst = worst.max(sq.sqrt() / (1.0 + lambda.abs()));
    }
    worst
}

/// Runs every oracle on one instance.
pub fn cross_check(
    test: &EmbeddingSet,
    reference: &EmbeddingSet,
    config: &KernelConfig,
    options: &SpectralOptions,
) -> Result<CrossCheck> {
    let blocks = build_blocks(test, reference, config)?;
    cross_check_blocks(&blocks, config.eta, options, Some((test, reference)))
}

/// Oracle comparison on prebuilt Gaussian blocks; the linear-kernel check
/// runs only when the raw sets are supplied and `d` is small enough.
pub fn cross_check_blocks(
    blocks: &KernelBlocks,
    eta: f64,
    options: &SpectralOptions,
    sets: Option<(&EmbeddingSet, &EmbeddingSet)>,
) -> Result<CrossCheck> {
    cross_check_split(blocks, blocks, eta, options, sets)
}

/// As [`cross_check_blocks`], but the factor path sees `factor_blocks` and
/// the oracles see `oracle_blocks`. Used to inject faults into one side.
#[doc(hidden)]
pub fn cross_check_split(
    factor_blocks: &KernelBlocks,
    oracle_blocks: &KernelBlocks,
    eta: f64,
    options: &SpectralOptions,
    sets: Option<(&EmbeddingSet, &EmbeddingSet)>,
) -> Result<CrossCheck> {
    let options = SpectralOptions {
        max_eigenvectors: None,
        ..options.clone()
    };
    let spectrum = differential_spectrum(factor_blocks, eta, &options)?;
    let general = oracle_nonsymmetric(oracle_blocks, eta)?;
    let real: Vec<f64> = general.iter().map(|c| c.re).collect();
    let nonsymmetric_deviation =
        deviation_against(&spectrum.eigenvalues_positive, &real, spectrum.cutoff_used);
    let max_imaginary = general
        .iter()
        .take(spectrum.eigenvalues_positive.len())
        .map(|c| c.im.abs())
        .fold(0.0, f64::max);

    let linear_deviation = match sets {
        Some((x, y)) if x.dim() <= LINEAR_ORACLE_MAX_DIM => {
            let linear = build_linear_blocks(x, y)?;
            let via_factor = differential_spectrum(
                &linear,
                eta,
                &SpectralOptions {
                    max_eigenvectors: Some(0),
                    ..options.clone()
                },
            )?;
            let explicit = oracle_linear_feature(x, y, eta)?;
            Some(deviation_against(
                &via_factor.eigenvalues_positive,
                &explicit,
                via_factor.cutoff_used,
            ))
        }
        _ => None,
    };

    let max_residual = eigenvector_residual(oracle_blocks, eta, &spectrum);
    Ok(CrossCheck {
        positive: spectrum.eigenvalues_positive,
        nonsymmetric_deviation,
        max_imaginary,
        linear_deviation,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        v
    }

    #[test]
    fn two_by_two_closed_form() {
        let c: f64 = 0.6;
        let a = faer::mat![[1.0, c], [-c, -1.0]];
        let ev = sorted_re(general_eigenvalues(a.as_ref()).unwrap());
        let root = (1.0 - c * c).sqrt();
        assert!((ev[0].re - root).abs() < 1e-14 && ev[0].im.abs() < 1e-14);
        assert!((ev[1].re + root).abs() < 1e-14 && ev[1].im.abs() < 1e-14);
    }

    #[test]
    fn rotation_has_complex_pair() {
        let t: f64 = 0.7;
        let a = faer::mat![[t.cos(), -t.sin()], [t.sin(), t.cos()]];
        let ev = general_eigenvalues(a.as_ref()).unwrap();
        for e in &ev {
            assert!((e.re - t.cos()).abs() < 1e-14);
            assert!((e.im.abs() - t.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn companion_matrix_roots() {
        // (x-1)(x-2)(x-3)(x+4)(x^2+1)
        let roots_re = [1.0, 2.0, 3.0, -4.0];
        let mut poly = vec![1.0];
        for r in roots_re {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= r * c;
            }
            poly = next;
        }
        // times (x^2 + 1)
        let mut next = vec![0.0; poly.len() + 2];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 2] += c;
        }
        poly = next;
        let deg = poly.len() - 1;
        let a = Mat::from_fn(deg, deg, |i, j| {
            if i == 0 {
                -poly[j + 1]
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        let ev = sorted_re(general_eigenvalues(a.as_ref()).unwrap());
        let expected = [3.0, 2.0, 1.0, 0.0, 0.0, -4.0];
        for (e, x) in ev.iter().zip(expected) {
            assert!((e.re - x).abs() < 1e-9, "{e} vs {x}");
        }
        let imag: Vec<f64> = ev.iter().map(|e| e.im.abs()).collect();
        assert!((imag[3] - 1.0).abs() < 1e-9 && (imag[4] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn agrees_with_faer_on_random_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for size in [1, 3, 7, 20, 45] {
            let a = Mat::from_fn(size, size, |_, _| rng.gen_range(-1.0..1.0));
            let ours = sorted_re(general_eigenvalues(a.as_ref()).unwrap());
            let theirs: Vec<Complex64> = a
                .eigenvalues()
                .unwrap()
                .into_iter()
                .map(|c| Complex64::new(c.re, c.im))
                .collect();
            let theirs = sorted_re(theirs);
            for (o, t) in ours.iter().zip(&theirs) {
                assert!((o.re - t.re).abs() < 1e-9, "size {size}: {o} vs {t}");
                assert!((o.im.abs() - t.im.abs()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_oracle_small_cases() {
        let x = EmbeddingSet::from_rows("x", &[[1.0, 0.0]]).unwrap();
        let y = EmbeddingSet::from_rows("y", &[[0.0, 1.0]]).unwrap();
        let ev = oracle_linear_feature(&x, &y, 1.0).unwrap();
        assert_eq!(ev, vec![1.0, -1.0]);

        let ev = oracle_linear_feature(&x, &x, 1.0).unwrap();
        assert!(ev.iter().all(|v| v.abs() < 1e-12));

        let wide = EmbeddingSet::new("w", 65, vec![0.0; 65]).unwrap();
        assert!(oracle_linear_feature(&wide, &wide, 1.0).is_err());
    }
}
