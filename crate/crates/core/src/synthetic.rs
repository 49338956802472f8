//! Seeded Gaussian-mixture data and the scripted two-dimensional scenarios.
//!
//! Every draw uses [`ChaCha8Rng`] seeded with `seed_from_u64`, one stream per
//! sampled set, so identical specs give bit-identical sets.

use rand::distributions::{Bernoulli, Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Per-component isotropic standard deviation.
    pub stds: Vec<f64>,
    pub seed: u64,
    pub count: usize,
}

impl GmmSpec {
    /// Every component shares `std`.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, std: f64, count: usize, seed: u64) -> Self {
        let stds = vec![std; weights.len()];
        Self {
            weights,
            means,
            stds,
            seed,
            count,
        }
    }

    /// Equal weights over `means`.
    pub fn uniform(means: Vec<Vec<f64>>, std: f64, count: usize, seed: u64) -> Self {
        let k = means.len().max(1);
        Self::new(vec![1.0 / k as f64; means.len()], means, std, count, seed)
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 {
            return Err(Error::InvalidParameter(
                "mixture needs at least one component".into(),
            ));
        }
        if self.means.len() != k || self.stds.len() != k {
            return Err(Error::InvalidParameter(format!(
                "{k} weights but {} means and {} stds",
                self.means.len(),
                self.stds.len()
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be nonnegative".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidParameter(
                "means must have dimension >= 1".into(),
            ));
        }
        for mean in &self.means {
            if mean.len() != d {
                return Err(Error::DimensionMismatch(d, mean.len()));
            }
            if mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("means must be finite".into()));
            }
        }
        if self.stds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter("stds must be positive".into()));
        }
        if self.count == 0 {
            return Err(Error::InvalidParameter("count must be positive".into()));
        }
        Ok(())
    }
}

struct Mixture<'a> {
    spec: &'a GmmSpec,
    choose: WeightedIndex<f64>,
}

impl<'a> Mixture<'a> {
    fn new(spec: &'a GmmSpec) -> Result<Self> {
        spec.validate()?;
        let choose = WeightedIndex::new(&spec.weights)
            .map_err(|e| Error::InvalidParameter(format!("weights: {e}")))?;
        Ok(Self { spec, choose })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> usize {
        let c = self.choose.sample(rng);
        let std = self.spec.stds[c];
        for &mu in &self.spec.means[c] {
            let z: f64 = StandardNormal.sample(rng);
            out.push(mu + std * z);
        }
        c
    }
}

/// Samples plus the component each one came from.
pub fn sample_gmm_labeled(spec: &GmmSpec) -> Result<(EmbeddingSet, Vec<usize>)> {
    let mixture = Mixture::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Vec::with_capacity(spec.count * spec.dim());
    let labels = (0..spec.count)
        .map(|_| mixture.draw(&mut rng, &mut data))
        .collect();
    Ok((EmbeddingSet::new("gmm", spec.dim(), data)?, labels))
}

pub fn sample_gmm(spec: &GmmSpec) -> Result<EmbeddingSet> {
    sample_gmm_labeled(spec).map(|(set, _)| set)
}

/// What a scenario is expected to produce under `sigma = 0.5`, `eta = 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expectation {
    pub ken_target: Option<f64>,
    pub ken_tolerance: f64,
    pub rken_target: Option<f64>,
    /// Number of clearly positive eigenvalues expected from the mode layout.
    pub outstanding_eigenvalues: Option<usize>,
    pub description: &'static str,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub test: EmbeddingSet,
    pub reference: EmbeddingSet,
    /// Component index of each test sample in `test_spec`.
    pub test_labels: Vec<usize>,
    pub reference_labels: Vec<usize>,
    pub test_spec: GmmSpec,
    pub reference_spec: GmmSpec,
    /// Centers of the modes only the test distribution carries.
    pub novel_centers: Vec<Vec<f64>>,
    pub expected: Expectation,
}

pub const FIGURE1_STD: f64 = 0.05;
pub const FIGURE1_SIGMA: f64 = 0.5;

fn figure1_reference_centers() -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![0.0, -1.0],
        vec![-1.0, 0.0],
    ]
}

fn figure1_novel_centers() -> Vec<Vec<f64>> {
    vec![
        vec![0.7, 0.7],
        vec![-0.7, 0.7],
        vec![0.7, -0.7],
        vec![-0.7, -0.7],
    ]
}

fn build(
    test_spec: GmmSpec,
    reference_spec: GmmSpec,
    novel_centers: Vec<Vec<f64>>,
    expected: Expectation,
) -> Result<Scenario> {
    let (test, test_labels) = sample_gmm_labeled(&test_spec)?;
    let (reference, reference_labels) = sample_gmm_labeled(&reference_spec)?;
    Ok(Scenario {
        test: test.with_label("test"),
        reference: reference.with_label("reference"),
        test_labels,
        reference_labels,
        test_spec,
        reference_spec,
        novel_centers,
        expected,
    })
}

/// The six two-dimensional settings built around a four-mode reference with
/// centers `(0, ±1), (±1, 0)` and novel centers `(±0.7, ±0.7)`.
///
/// | column | test distribution | reference |
/// |---|---|---|
/// | 1 | novel `(0.7, 0.7)`, `(-0.7, -0.7)`, 1/2 each | 4 modes, 1/4 each |
/// | 2 | all 4 novel modes, 1/4 each | same |
/// | 3 | 4 novel + shared `(0, 1)`, `(1, 0)`, 1/6 each | same |
/// | 4 | shared `(0, 1)`, `(1, 0)` at 0.4 each, novel 0.05 each | same |
/// | 5 | the reference distribution itself | same |
/// | 6 | column 2 | 8 modes, 1/8 each, adding `(±2, 0), (0, ±2)` |
///
/// Every component has std 0.05. Test samples use `seed`, reference
/// samples `seed + 1`.
pub fn scenario_figure1(column: u32, count: usize, seed: u64) -> Result<Scenario> {
    let reference_centers = figure1_reference_centers();
    let novel = figure1_novel_centers();
    let std = FIGURE1_STD;
    let ref_seed = seed.wrapping_add(1);
    let reference = GmmSpec::uniform(reference_centers.clone(), std, count, ref_seed);
    let all_novel = GmmSpec::uniform(novel.clone(), std, count, seed);
    let shared = [reference_centers[0].clone(), reference_centers[1].clone()];

    match column {
        1 => {
            let centers = vec![novel[0].clone(), novel[3].clone()];
            build(
                GmmSpec::uniform(centers.clone(), std, count, seed),
                reference,
                centers,
                Expectation {
                    ken_target: Some(0.74),
                    ken_tolerance: 0.15,
                    outstanding_eigenvalues: Some(2),
                    description: "two novel modes",
                    ..Default::default()
                },
            )
        }
        2 => build(
            all_novel,
            reference,
            novel,
            Expectation {
                ken_target: Some(1.40),
                ken_tolerance: 0.15,
                rken_target: None,
                outstanding_eigenvalues: Some(4),
                description: "four novel modes",
            },
        ),
        3 => {
            let mut means = novel.clone();
            means.extend(shared.iter().cloned());
            build(
                GmmSpec::uniform(means, std, count, seed),
                reference,
                novel,
                Expectation {
                    ken_target: Some(0.92),
                    ken_tolerance: 0.15,
                    outstanding_eigenvalues: Some(4),
                    description: "four novel modes plus two shared modes, 1/6 each",
                    ..Default::default()
                },
            )
        }
        4 => {
            let mut means = novel.clone();
            means.extend(shared.iter().cloned());
            let weights = vec![0.05, 0.05, 0.05, 0.05, 0.4, 0.4];
            build(
                GmmSpec::new(weights, means, std, count, seed),
                reference,
                novel,
                Expectation {
                    outstanding_eigenvalues: Some(6),
                    ken_tolerance: 0.15,
                    description: "shared modes raised to 0.4, novel modes at 0.05",
                    ..Default::default()
                },
            )
        }
        5 => build(
            reference.clone().with_seed(seed),
            reference,
            Vec::new(),
            Expectation {
                ken_target: Some(0.0),
                ken_tolerance: 0.05,
                outstanding_eigenvalues: Some(0),
                description: "identical distributions",
                ..Default::default()
            },
        ),
        6 => {
            let mut means = reference_centers;
            means.extend([
                vec![2.0, 0.0],
                vec![-2.0, 0.0],
                vec![0.0, 2.0],
                vec![0.0, -2.0],
            ]);
            build(
                all_novel,
                GmmSpec::uniform(means, std, count, ref_seed),
                novel,
                Expectation {
                    ken_target: Some(1.40),
                    ken_tolerance: 0.15,
                    rken_target: Some(1.83),
                    outstanding_eigenvalues: Some(4),
                    description: "four extra reference-only modes",
                },
            )
        }
        other => Err(Error::InvalidParameter(format!(
            "scenario column must be in 1..=6, got {other}"
        ))),
    }
}

/// Reference from `ref_spec`; each test sample comes from `novel_spec` with
/// probability `alpha` and from `ref_spec` otherwise.
///
/// Test labels index `ref_spec` components first, then `novel_spec`
/// components offset by the number of reference components. The counts and
/// seeds stored in the specs are ignored: reference samples use `seed`, test
/// samples `seed + 1`.
pub fn scenario_alpha_mixture(
    alpha: f64,
    ref_spec: &GmmSpec,
    novel_spec: &GmmSpec,
    count: usize,
    seed: u64,
) -> Result<Scenario> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    let ref_spec = ref_spec.clone().with_count(count).with_seed(seed);
    let novel_spec = novel_spec
        .clone()
        .with_count(count)
        .with_seed(seed.wrapping_add(1));
    if ref_spec.dim() != novel_spec.dim() {
        return Err(Error::DimensionMismatch(ref_spec.dim(), novel_spec.dim()));
    }
    let (reference, reference_labels) = sample_gmm_labeled(&ref_spec)?;

    let from_ref = Mixture::new(&ref_spec)?;
    let from_novel = Mixture::new(&novel_spec)?;
    let coin = Bernoulli::new(alpha).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let offset = ref_spec.weights.len();
    let mut rng = ChaCha8Rng::seed_from_u64(novel_spec.seed);
    let mut data = Vec::with_capacity(count * ref_spec.dim());
    let test_labels = (0..count)
        .map(|_| {
            if coin.sample(&mut rng) {
                offset + from_novel.draw(&mut rng, &mut data)
            } else {
                from_ref.draw(&mut rng, &mut data)
            }
        })
        .collect();
    let test = EmbeddingSet::new("test", ref_spec.dim(), data)?;

    // The test mixture written as a single GmmSpec.
    let mut weights: Vec<f64> = ref_spec.weights.iter().map(|w| (1.0 - alpha) * w).collect();
    weights.extend(novel_spec.weights.iter().map(|w| alpha * w));
    let mut means = ref_spec.means.clone();
    means.extend(novel_spec.means.iter().cloned());
    let mut stds = ref_spec.stds.clone();
    stds.extend(novel_spec.stds.iter().copied());
    let test_spec = GmmSpec {
        weights,
        means,
        stds,
        seed: novel_spec.seed,
        count,
    };

    Ok(Scenario {
        test,
        reference: reference.with_label("reference"),
        test_labels,
        reference_labels,
        test_spec,
        novel_centers: novel_spec.means.clone(),
        reference_spec: ref_spec,
        expected: Expectation::default(),
    })
}
