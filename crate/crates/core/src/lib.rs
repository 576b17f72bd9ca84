//! Clustering-validation laboratory for residential load profiles.
//!
//! The pipeline turns 15-minute smart-meter readings into per-household
//! median daily profiles, normalizes them to unit length, reduces them with
//! PCA and clusters them with fuzzy c-means. Five cluster validation indices
//! (silhouette, Calinski–Harabasz, Davies–Bouldin, Dunn, Xie–Beni) score the
//! result, and the [`perturb`] module measures how those indices respond to
//! outliers, denser clusters and smaller clusters.
//!
//! ```
//! use cvilab::cvi::{evaluate_partition, CviIndex};
//! use ndarray::array;
//!
//! let points = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
//! let report = evaluate_partition(points.view(), &[0, 0, 1, 1]);
//! assert!((report.get(CviIndex::CalinskiHarabasz).unwrap() - 200.0).abs() < 1e-9);
//! assert!((report.get(CviIndex::Dunn).unwrap() - 10.0).abs() < 1e-12);
//! ```

pub mod cluster;
pub mod cvi;
pub mod format;
pub mod perturb;
pub mod profiles;
pub mod reduce;
pub mod rng;
mod serde_rows;

pub use cluster::{ClusterModel, FcmConfig, FcmError, Fuzzifier};
pub use cvi::{CviError, CviIndex, CviReport, PartitionGeometry};
pub use perturb::{ExperimentKind, ExperimentReport, PerturbConfig, PerturbError, Verdict};
pub use profiles::{DailyProfile, ProfileError, ProfileMatrix, ReadingSeries, SynthSpec};
pub use reduce::{PcaError, PcaModel, ReducedMatrix};

/// Number of 15-minute slots in a day.
pub const SLOTS_PER_DAY: usize = 96;

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/pca.md")]
    mod pca {}
    #[doc = include_str!("../../../book/src/fcm.md")]
    mod fcm {}
    #[doc = include_str!("../../../book/src/indices.md")]
    mod indices {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/hypotheses.md")]
    mod hypotheses {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
