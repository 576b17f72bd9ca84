//! Perturbation experiments: how the indices react to outliers, to denser
//! clusters and to smaller clusters.
//!
//! Each experiment holds a partition fixed, changes the points in a known
//! way, re-scores the partition and compares against a baseline. The
//! density and diameter experiments are Monte-Carlo: trial `t` draws from
//! random stream `t` of the configured seed (see [`crate::rng`]), trials run
//! in parallel and are merged in trial order, so results do not depend on
//! the thread count.
//!
//! Experiments score crisp partitions throughout (XB in its crisp form),
//! because the injected and replacement points have no memberships.

mod hypothesis;
mod outliers;
mod sampling;
mod trials;

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{FcmConfig, FcmError};
use crate::cvi::{CviError, CviIndex, CviReport};
use crate::format::sig9;

pub use hypothesis::{binomial_upper_tail, judge_hypothesis, sign_test, SignTest, SIGNIFICANCE};
pub use outliers::{find_singleton_clusters, outlier_experiment};
pub use sampling::{inject_density, shrink_clusters};
pub use trials::{density_experiment, diameter_experiment};

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("invalid perturbation config: {0}")]
    InvalidConfig(String),
    #[error("the partition has no singleton clusters")]
    NoSingletons,
    #[error("{0} singleton clusters would need 2^{0} variants; at most 16 are supported")]
    TooManySingletons(usize),
    #[error("need at least {required} non-singleton clusters, found {found}")]
    TooFewClusters { found: usize, required: usize },
    #[error("cluster {0} does not exist in the partition")]
    UnknownCluster(usize),
    #[error("cluster {cluster} has zero radius; cannot sample inside it")]
    DegenerateCluster { cluster: usize },
    /// In `d` dimensions a Gaussian draw lands about `σ·√d` from the centre,
    /// so with `σ = radius / sigma_divisor` the acceptance rate collapses
    /// once `√d` approaches `sigma_divisor`, even for isolated clusters.
    #[error(
        "gave up sampling into cluster {cluster} after {attempts} rejected draws in {dimension} dimensions; \
         its region overlaps other clusters or sigma_divisor is too small for the dimension \
         (try one above sqrt({dimension}))"
    )]
    RejectionBudgetExhausted { cluster: usize, attempts: usize, dimension: usize },
    #[error("the report has no rows")]
    EmptyReport,
    #[error(transparent)]
    Cvi(#[from] CviError),
    #[error("re-clustering failed: {0}")]
    Recluster(#[from] FcmError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub seed: u64,
    pub trials: usize,
    /// Points injected per cluster, as a fraction of its size (rounded up).
    pub density_add_fraction: f64,
    /// New radius as a fraction of the old one, in (0, 1).
    pub shrink_factor: f64,
    /// Sampling standard deviation is `radius / sigma_divisor`.
    pub sigma_divisor: f64,
    /// Rejected draws allowed per accepted sample.
    pub max_rejection_attempts: usize,
    /// Re-fit fuzzy c-means on every perturbed dataset instead of keeping the
    /// partition fixed.
    pub recluster: Option<FcmConfig>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            density_add_fraction: 1.0,
            shrink_factor: 0.8,
            sigma_divisor: 4.0,
            max_rejection_attempts: 1000,
            recluster: None,
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<(), PerturbError> {
        let invalid = |msg: String| Err(PerturbError::InvalidConfig(msg));
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return invalid(format!("shrink factor must lie in (0, 1), got {}", self.shrink_factor));
        }
        if !(self.density_add_fraction >= 0.0 && self.density_add_fraction.is_finite()) {
            return invalid(format!("density fraction must be finite and >= 0, got {}", self.density_add_fraction));
        }
        if !(self.sigma_divisor > 0.0 && self.sigma_divisor.is_finite()) {
            return invalid(format!("sigma divisor must be positive, got {}", self.sigma_divisor));
        }
        if self.max_rejection_attempts == 0 {
            return invalid("max_rejection_attempts must be at least 1".into());
        }
        if let Some(fcm) = &self.recluster {
            fcm.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Outliers,
    Density,
    Diameter,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [ExperimentKind::Outliers, ExperimentKind::Density, ExperimentKind::Diameter];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Outliers => "outliers",
            ExperimentKind::Density => "density",
            ExperimentKind::Diameter => "diameter",
        }
    }

    fn stream_domain(self) -> u64 {
        match self {
            ExperimentKind::Outliers => 1,
            ExperimentKind::Density => 2,
            ExperimentKind::Diameter => 3,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "outliers" => Ok(ExperimentKind::Outliers),
            "density" => Ok(ExperimentKind::Density),
            "diameter" => Ok(ExperimentKind::Diameter),
            other => Err(format!("unknown experiment kind `{other}` (expected outliers, density or diameter)")),
        }
    }
}

/// Outcome of testing the "no effect" / "positive effect" hypothesis for
/// one index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// Identical across every outlier combination.
    Unaffected,
    /// Better without the outliers, and each single outlier makes it worse.
    ImprovesOnRemoval,
    /// Better with the outliers, and each single outlier makes it better.
    ImprovesOnAddition,
    /// Outliers push the index in different directions.
    Mixed,
    /// The perturbation significantly improves the index.
    Positive,
    /// The perturbation significantly worsens the index.
    Negative,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Unaffected => "UNAFFECTED",
            Verdict::ImprovesOnRemoval => "IMPROVES_ON_REMOVAL",
            Verdict::ImprovesOnAddition => "IMPROVES_ON_ADDITION",
            Verdict::Mixed => "MIXED",
            Verdict::Positive => "POSITIVE",
            Verdict::Negative => "NEGATIVE",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// One outlier combination or one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub name: String,
    /// Outlier experiment: whether each singleton cluster was kept.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub included: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<usize>,
    pub report: CviReport,
}

/// Per-index means over trials whose value was finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageReport {
    pub sh: Option<f64>,
    pub ch: Option<f64>,
    pub db: Option<f64>,
    pub di: Option<f64>,
    pub xb: Option<f64>,
    pub trials: usize,
    /// Trials excluded from each index's mean.
    pub degenerate_counts: BTreeMap<CviIndex, usize>,
}

impl AverageReport {
    pub fn get(&self, index: CviIndex) -> Option<f64> {
        match index {
            CviIndex::Silhouette => self.sh,
            CviIndex::CalinskiHarabasz => self.ch,
            CviIndex::DaviesBouldin => self.db,
            CviIndex::Dunn => self.di,
            CviIndex::XieBeni => self.xb,
        }
    }

    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a CviReport>) -> Self {
        let reports: Vec<&CviReport> = reports.into_iter().collect();
        let mut degenerate_counts = BTreeMap::new();
        let mut means = [None; 5];
        for (slot, index) in means.iter_mut().zip(CviIndex::ALL) {
            let values: Vec<f64> = reports.iter().filter_map(|r| r.get(index)).collect();
            degenerate_counts.insert(index, reports.len() - values.len());
            if !values.is_empty() {
                *slot = Some(values.iter().sum::<f64>() / values.len() as f64);
            }
        }
        let [sh, ch, db, di, xb] = means;
        Self { sh, ch, db, di, xb, trials: reports.len(), degenerate_counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config: PerturbConfig,
    /// Outlier experiment: every cluster kept. Density and diameter: the
    /// partition with its singleton clusters removed.
    pub baseline: CviReport,
    /// Outlier experiment: the singleton clusters, by label.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub singleton_clusters: Vec<usize>,
    pub rows: Vec<ExperimentRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average: Option<AverageReport>,
    pub verdicts: BTreeMap<CviIndex, Verdict>,
    /// Density and diameter: the per-index paired sign tests behind the verdicts.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sign_tests: BTreeMap<CviIndex, SignTest>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), sig9)
}

impl ExperimentReport {
    /// Flat CSV: one row per outlier combination (with a 0/1 column per
    /// singleton cluster), or `BASELINE`, one row per trial and `AVERAGE`.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        let keys = CviIndex::ALL.map(CviIndex::key).join(",");
        let indices = |r: &CviReport| CviIndex::ALL.map(|i| cell(r.get(i))).join(",");
        match self.kind {
            ExperimentKind::Outliers => {
                let flags: Vec<String> = self.singleton_clusters.iter().map(|c| format!("outlier_{c}")).collect();
                writeln!(w, "row,{},{}", flags.join(","), keys)?;
                for row in &self.rows {
                    let kept: Vec<&str> = row.included.iter().map(|&b| if b { "1" } else { "0" }).collect();
                    writeln!(w, "{},{},{}", row.name, kept.join(","), indices(&row.report))?;
                }
            }
            ExperimentKind::Density | ExperimentKind::Diameter => {
                writeln!(w, "row,{keys}")?;
                writeln!(w, "BASELINE,{}", indices(&self.baseline))?;
                for row in &self.rows {
                    writeln!(w, "{},{}", row.name, indices(&row.report))?;
                }
                if let Some(avg) = &self.average {
                    writeln!(w, "AVERAGE,{}", CviIndex::ALL.map(|i| cell(avg.get(i))).join(","))?;
                }
            }
        }
        w.flush()
    }
}

/// Drops the points of singleton clusters.
pub fn remove_singletons(points: ArrayView2<f64>, labels: &[usize]) -> (Array2<f64>, Vec<usize>) {
    let singletons = find_singleton_clusters(labels);
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| !singletons.contains(&labels[i])).collect();
    (points.select(Axis(0), &keep), keep.iter().map(|&i| labels[i]).collect())
}

/// The partition to score for a perturbed dataset: the given labels, or a
/// fresh fuzzy c-means fit with as many clusters when re-clustering.
fn partition_for(
    points: ArrayView2<f64>,
    labels: Vec<usize>,
    config: &PerturbConfig,
    kind: ExperimentKind,
    index: u64,
) -> Result<Vec<usize>, PerturbError> {
    let Some(template) = &config.recluster else {
        return Ok(labels);
    };
    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let fcm = FcmConfig {
        k: distinct.len(),
        seed: crate::rng::derive_seed(config.seed, kind.stream_domain(), index),
        ..template.clone()
    };
    Ok(crate::cluster::fit_fcm(points, &fcm)?.labels)
}
