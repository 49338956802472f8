//! Kernel Entropic Novelty (KEN): how much of a test sample set's mode
//! structure is absent from, or underrepresented in, a reference set.
//!
//! The pipeline is
//! [`build_blocks`] -> [`differential_spectrum`] -> [`ken_score`] / [`extract_modes`],
//! wrapped end to end by [`evaluate`].
//!
//! ```
//! use ken::{evaluate, EmbeddingSet, EvaluateOptions, KernelConfig};
//!
//! let test = EmbeddingSet::from_rows("test", &[[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]]).unwrap();
//! let reference = EmbeddingSet::from_rows("ref", &[[0.0, 0.0], [0.1, 0.0]]).unwrap();
//! let report = evaluate(&test, &reference, &KernelConfig::new(1.0, 1.0).unwrap(),
//!                       &EvaluateOptions::default()).unwrap();
//! // Two novel points, one eigenvalue each.
//! assert_eq!(report.eigenvalues_positive.len(), 2);
//! assert!(report.ken > 0.0);
//! ```

pub mod embeddings;
pub mod error;
pub mod io;
pub mod kernel;
pub mod novelty;
pub mod spectral;
pub mod synthetic;

pub use embeddings::EmbeddingSet;
pub use error::{Error, Result};
pub use kernel::{
    build_blocks, build_linear_blocks, gaussian_kernel, select_bandwidth, BandwidthSearch,
    BandwidthSelection, KernelBlocks, KernelConfig,
};
pub use novelty::{
    cluster_score, conditional_entropy_identity_check, evaluate, extract_modes, ken_score,
    EvaluateOptions, ModeSummary, NoveltyReport, RankedSample,
};
pub use spectral::{
    differential_spectrum, EigenvectorBasis, Factorization, SpectralOptions, SpectralResult,
};
