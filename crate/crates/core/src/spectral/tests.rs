use super::oracle::{eigenvector_residual, oracle_nonsymmetric};
use super::*;
use crate::embeddings::EmbeddingSet;
use crate::kernel::{build_blocks, gaussian_kernel, KernelConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_set(count: usize, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingSet {
    let data = (0..count * dim)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    EmbeddingSet::new("random", dim, data).unwrap()
}

fn random_pair(n: usize, m: usize, d: usize, seed: u64) -> (EmbeddingSet, EmbeddingSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_set(n, d, &mut rng), random_set(m, d, &mut rng))
}

fn blocks_for(x: &EmbeddingSet, y: &EmbeddingSet, sigma: f64) -> KernelBlocks {
    build_blocks(x, y, &KernelConfig::new(sigma, 1.0).unwrap()).unwrap()
}

fn point() -> EmbeddingSet {
    EmbeddingSet::from_rows("p", &[[0.3, -1.2]]).unwrap()
}

#[test]
fn joint_kernel_single_point() {
    let blocks = blocks_for(&point(), &point(), 1.0);
    let k = joint_kernel(&blocks, 1.0);
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(k[(i, j)], 1.0);
        }
    }
    let k = joint_kernel(&blocks, 4.0);
    assert_eq!(
        [k[(0, 0)], k[(0, 1)], k[(1, 0)], k[(1, 1)]],
        [1.0, 2.0, 2.0, 4.0]
    );
}

#[test]
fn joint_kernel_matches_concatenated_assembly() {
    let (x, y) = random_pair(5, 4, 3, 2);
    let blocks = blocks_for(&x, &y, 1.3);
    let k = joint_kernel(&blocks, 1.0);
    let all = x.concat(&y).unwrap();
    let (n, m) = (5usize, 4usize);
    let weight = |i: usize| {
        if i < n {
            1.0 / n as f64
        } else {
            1.0 / m as f64
        }
    };
    for i in 0..n + m {
        for j in 0..n + m {
            let expected = gaussian_kernel(all.row(i), all.row(j), 1.3).unwrap()
                * (weight(i) * weight(j)).sqrt();
            assert!((k[(i, j)] - expected).abs() < 1e-14, "({i},{j})");
            assert_eq!(k[(i, j)], k[(j, i)]);
        }
    }
    for eta in [1.0, 2.5] {
        let k = joint_kernel(&blocks, eta);
        let trace: f64 = (0..n + m).map(|i| k[(i, i)]).sum();
        assert!((trace - (1.0 + eta)).abs() < 1e-12);
    }
}

#[test]
fn differential_matrix_signs() {
    let (x, y) = random_pair(3, 2, 2, 5);
    let blocks = blocks_for(&x, &y, 1.0);
    let joint = joint_kernel(&blocks, 2.0);
    let diff = differential_kernel_matrix(&blocks, 2.0);
    for i in 0..5 {
        for j in 0..5 {
            let sign = if i < 3 { 1.0 } else { -1.0 };
            assert_eq!(diff[(i, j)], sign * joint[(i, j)]);
        }
    }
}

#[test]
fn identical_sets_have_no_positive_spectrum() {
    let (x, _) = random_pair(30, 1, 4, 8);
    let spectrum =
        differential_spectrum(&blocks_for(&x, &x, 2.0), 1.0, &SpectralOptions::default()).unwrap();
    assert!(spectrum.eigenvalues_positive.iter().all(|&l| l <= 1e-8));

    let single = differential_spectrum(
        &blocks_for(&point(), &point(), 1.0),
        1.0,
        &SpectralOptions::default(),
    )
    .unwrap();
    assert!(single.eigenvalues_positive.is_empty());
    assert!(single.eigenvalues_all.iter().all(|l| l.abs() < 1e-12));
}

#[test]
fn oracle_agreement_seed_11() {
    let (x, y) = random_pair(6, 5, 3, 11);
    let blocks = blocks_for(&x, &y, 1.0);
    let spectrum = differential_spectrum(&blocks, 1.0, &SpectralOptions::default()).unwrap();
    let general = oracle_nonsymmetric(&blocks, 1.0).unwrap();
    assert!(!spectrum.eigenvalues_positive.is_empty());
    for (l, g) in spectrum.eigenvalues_positive.iter().zip(&general) {
        assert!((l - g.re).abs() < 1e-6, "{l} vs {g}");
        assert!(g.im.abs() < 1e-8);
    }
    let above = general
        .iter()
        .filter(|g| g.re > spectrum.cutoff_used)
        .count();
    assert_eq!(above, spectrum.eigenvalues_positive.len());
}

#[test]
fn spectrum_invariants() {
    for (seed, eta) in [(1u64, 1.0), (2, 1.7), (3, 4.0)] {
        let (x, y) = random_pair(25, 18, 3, seed);
        let blocks = blocks_for(&x, &y, 0.9);
        let s = differential_spectrum(&blocks, eta, &SpectralOptions::default()).unwrap();
        assert_eq!(s.eigenvalues_all.len(), 43);
        assert!(s.eigenvalues_all.windows(2).all(|w| w[0] >= w[1]));
        let total: f64 = s.eigenvalues_all.iter().sum();
        assert!((total - (1.0 - eta)).abs() < 1e-8, "{total}");
        let sum_pos: f64 = s.eigenvalues_positive.iter().sum();
        assert!(sum_pos <= 1.0 + 1e-8);
        assert!(s
            .eigenvalues_positive
            .iter()
            .all(|&l| l > s.cutoff_used && l <= 1.0 + 1e-8));
        assert_eq!(s.eigenvectors.len(), s.eigenvalues_positive.len());
        for u in &s.eigenvectors {
            assert_eq!(u.len(), 43);
            assert!(u[..25].iter().sum::<f64>() >= 0.0);
            let norm: f64 = u.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert!(eigenvector_residual(&blocks, eta, &s) <= 1e-6);
    }
}

#[test]
fn cutoff_rule() {
    assert_eq!(positive_cutoff(0.5, 1e-10, 1e-8), 5e-9);
    assert_eq!(positive_cutoff(1e-3, 1e-10, 1e-8), 1e-10);
    assert_eq!(positive_cutoff(-1.0, 1e-10, 1e-8), 1e-10);
}

#[test]
fn weyl_monotonicity_in_eta() {
    let (x, y) = random_pair(20, 15, 2, 21);
    let blocks = blocks_for(&x, &y, 0.8);
    let mut previous: Option<Vec<f64>> = None;
    for eta in [1.0, 1.5, 2.0, 5.0, 10.0] {
        let s = differential_spectrum(&blocks, eta, &SpectralOptions::default()).unwrap();
        if let Some(prev) = &previous {
            for (a, b) in s.eigenvalues_all.iter().zip(prev) {
                assert!(*a <= b + 1e-10, "eta {eta}: {a} > {b}");
            }
        }
        previous = Some(s.eigenvalues_all);
    }
}

#[test]
fn sign_rule() {
    let mut u = vec![-0.5, 0.1, 0.7];
    apply_sign_rule(&mut u, 2);
    assert_eq!(u, vec![0.5, -0.1, -0.7]);
    let once = u.clone();
    apply_sign_rule(&mut u, 2);
    assert_eq!(u, once);
    let mut zero = vec![0.5, -0.5, 0.3];
    apply_sign_rule(&mut zero, 2);
    assert_eq!(zero, vec![0.5, -0.5, 0.3]);
}

#[test]
fn permutation_invariance() {
    let (x, y) = random_pair(12, 9, 3, 33);
    let base =
        differential_spectrum(&blocks_for(&x, &y, 1.1), 1.0, &SpectralOptions::default()).unwrap();
    let px: Vec<usize> = (0..12).rev().collect();
    let py: Vec<usize> = vec![4, 0, 8, 2, 6, 1, 7, 3, 5];
    let (xp, yp) = (x.select(&px).unwrap(), y.select(&py).unwrap());
    let permuted =
        differential_spectrum(&blocks_for(&xp, &yp, 1.1), 1.0, &SpectralOptions::default())
            .unwrap();
    for (a, b) in base.eigenvalues_all.iter().zip(&permuted.eigenvalues_all) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn eigenvalue_only_mode_matches() {
    let (x, y) = random_pair(15, 15, 2, 4);
    let blocks = blocks_for(&x, &y, 0.7);
    let full = differential_spectrum(&blocks, 1.0, &SpectralOptions::default()).unwrap();
    let quick = differential_spectrum(
        &blocks,
        1.0,
        &SpectralOptions {
            max_eigenvectors: Some(0),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(quick.eigenvectors.is_empty());
    for (a, b) in full.eigenvalues_all.iter().zip(&quick.eigenvalues_all) {
        assert!((a - b).abs() < 1e-12);
    }
    let two = differential_spectrum(
        &blocks,
        1.0,
        &SpectralOptions {
            max_eigenvectors: Some(2),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(
        two.eigenvectors.len(),
        2.min(full.eigenvalues_positive.len())
    );
}

#[test]
fn gamma_basis_vectors_are_gamma_eigenvectors() {
    let (x, y) = random_pair(10, 8, 2, 17);
    let blocks = blocks_for(&x, &y, 1.0);
    let options = SpectralOptions {
        basis: EigenvectorBasis::Gamma,
        ..Default::default()
    };
    let s = differential_spectrum(&blocks, 1.0, &options).unwrap();
    assert_eq!(s.basis, EigenvectorBasis::Gamma);
    let factor = psd_factor(joint_kernel(&blocks, 1.0).as_ref()).unwrap();
    let gamma = gamma_matrix(factor.factor.as_ref(), 10);
    for (w, &lambda) in s.eigenvectors.iter().zip(&s.eigenvalues_positive) {
        for i in 0..18 {
            let gw: f64 = (0..18).map(|j| gamma[(i, j)] * w[j]).sum();
            assert!((gw - lambda * w[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn pivoted_matches_dense() {
    let (x, y) = random_pair(150, 120, 2, 99);
    let blocks = blocks_for(&x, &y, 0.6);
    let dense = differential_spectrum(&blocks, 1.0, &SpectralOptions::default()).unwrap();
    let pivoted = differential_spectrum(
        &blocks,
        1.0,
        &SpectralOptions {
            factorization: Factorization::Pivoted,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(pivoted.factor_path, FactorPath::PivotedCholesky);
    assert!(pivoted.factor_rank < 270);
    assert_eq!(
        dense.eigenvalues_positive.len(),
        pivoted.eigenvalues_positive.len()
    );
    for (a, b) in dense.eigenvalues_all.iter().zip(&pivoted.eigenvalues_all) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    assert!(eigenvector_residual(&blocks, 1.0, &pivoted) <= 1e-6);
    // Leading, well-separated eigenvectors agree once the sign rule is applied.
    for k in 0..3 {
        let gap = dense.eigenvalues_positive[k] - dense.eigenvalues_positive[k + 1];
        if gap > 1e-3 {
            let diff = dense.eigenvectors[k]
                .iter()
                .zip(&pivoted.eigenvectors[k])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-6, "vector {k}: {diff}");
        }
    }
}

#[test]
fn rejects_small_eta() {
    let blocks = blocks_for(&point(), &point(), 1.0);
    assert!(differential_spectrum(&blocks, 0.5, &SpectralOptions::default()).is_err());
    assert!(differential_spectrum(&blocks, f64::NAN, &SpectralOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trace_and_oracle_hold(
        seed in any::<u64>(),
        n in 1usize..12,
        m in 1usize..12,
        d in 1usize..4,
        sigma in 0.3f64..3.0,
        eta in 1.0f64..4.0,
    ) {
        let (x, y) = random_pair(n, m, d, seed);
        let blocks = build_blocks(&x, &y, &KernelConfig::new(sigma, eta).unwrap()).unwrap();
        let s = differential_spectrum(&blocks, eta, &SpectralOptions::default()).unwrap();
        let total: f64 = s.eigenvalues_all.iter().sum();
        prop_assert!((total - (1.0 - eta)).abs() < 1e-8);
        let general = oracle_nonsymmetric(&blocks, eta).unwrap();
        for (l, g) in s.eigenvalues_positive.iter().zip(&general) {
            prop_assert!((l - g.re).abs() < 1e-6);
        }
        prop_assert!(eigenvector_residual(&blocks, eta, &s) <= 1e-6);
    }
}
