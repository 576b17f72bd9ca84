//! Monte-Carlo density and diameter experiments.

use std::collections::BTreeMap;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::hypothesis::trial_sign_tests;
use super::sampling::{sample_in_region, shrink_with_geometry};
use super::{
    partition_for, remove_singletons, AverageReport, ExperimentKind, ExperimentReport, ExperimentRow, PerturbConfig,
    PerturbError,
};
use crate::cvi::{evaluate_partition, PartitionGeometry};
use crate::rng::{self, Rng};

/// Runs `perturb` once per trial on the singleton-free partition and
/// collects everything into a report.
fn run_trials<F>(
    kind: ExperimentKind,
    points: ArrayView2<f64>,
    labels: &[usize],
    config: &PerturbConfig,
    perturb: F,
) -> Result<ExperimentReport, PerturbError>
where
    F: Fn(ArrayView2<f64>, &[usize], &PartitionGeometry, &mut Rng) -> Result<(Array2<f64>, Vec<usize>), PerturbError>
        + Sync,
{
    config.validate()?;
    let (points, labels) = remove_singletons(points, labels);
    let g = PartitionGeometry::new(points.view(), &labels)?;
    if g.k() < 2 {
        return Err(PerturbError::TooFewClusters { found: g.k(), required: 2 });
    }
    let baseline = evaluate_partition(points.view(), &labels);

    let rows = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(config.seed, t as u64);
            let (new_points, new_labels) = perturb(points.view(), &labels, &g, &mut rng)?;
            let new_labels = partition_for(new_points.view(), new_labels, config, kind, t as u64)?;
            Ok(ExperimentRow {
                name: format!("trial_{t}"),
                included: Vec::new(),
                trial: Some(t),
                report: evaluate_partition(new_points.view(), &new_labels),
            })
        })
        .collect::<Result<Vec<_>, PerturbError>>()?;

    let mut report = ExperimentReport {
        kind,
        config: config.clone(),
        baseline,
        singleton_clusters: Vec::new(),
        average: Some(AverageReport::from_reports(rows.iter().map(|r| &r.report))),
        rows,
        verdicts: BTreeMap::new(),
        sign_tests: BTreeMap::new(),
    };
    report.sign_tests = trial_sign_tests(&report);
    report.verdicts = super::judge_hypothesis(&report)?;
    Ok(report)
}

/// Adds `⌈density_add_fraction · n_j⌉` sampled members to every
/// non-singleton cluster `j` in each trial and re-scores the partition.
/// Singleton clusters are removed first; the baseline is the partition
/// without them.
pub fn density_experiment(
    points: ArrayView2<f64>,
    labels: &[usize],
    config: &PerturbConfig,
) -> Result<ExperimentReport, PerturbError> {
    run_trials(ExperimentKind::Density, points, labels, config, |points, labels, g, rng| {
        let mut blocks = vec![points.to_owned()];
        let mut new_labels = labels.to_vec();
        for j in 0..g.k() {
            let count = (config.density_add_fraction * g.cluster_sizes[j] as f64).ceil() as usize;
            if count == 0 {
                continue;
            }
            blocks.push(sample_in_region(g, j, g.radii[j], count, config, rng)?);
            new_labels.extend(std::iter::repeat_n(g.cluster_labels[j], count));
        }
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        let augmented = concatenate(Axis(0), &views).expect("blocks share the column count");
        Ok((augmented, new_labels))
    })
}

/// Shrinks every cluster to `shrink_factor` of its radius in each trial
/// (see [`super::shrink_clusters`]) and re-scores the partition. Singleton
/// clusters are removed first; the baseline is the partition without them.
pub fn diameter_experiment(
    points: ArrayView2<f64>,
    labels: &[usize],
    config: &PerturbConfig,
) -> Result<ExperimentReport, PerturbError> {
    run_trials(ExperimentKind::Diameter, points, labels, config, |points, labels, g, rng| {
        Ok((shrink_with_geometry(points, g, config, rng)?, labels.to_vec()))
    })
}
