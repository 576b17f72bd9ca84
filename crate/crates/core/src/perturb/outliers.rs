//! Toggling singleton clusters in and out of the data.

use std::collections::BTreeMap;

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;

use super::{partition_for, ExperimentKind, ExperimentReport, ExperimentRow, PerturbConfig, PerturbError};
use crate::cvi::evaluate_partition;

/// Largest number of singleton clusters the experiment will enumerate.
const MAX_SINGLETONS: usize = 16;

/// Labels of the clusters with exactly one member, ascending.
pub fn find_singleton_clusters(labels: &[usize]) -> Vec<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts.into_iter().filter(|&(_, n)| n == 1).map(|(l, _)| l).collect()
}

/// Scores the partition once for each of the `2^s` subsets of its `s`
/// singleton clusters that stay in the data.
///
/// Row `r` keeps singleton `i` (in ascending label order) when bit
/// `s - 1 - i` of `r` is set, so row 0 keeps none of them and the last row
/// keeps all of them. The baseline is the untouched partition.
pub fn outlier_experiment(
    points: ArrayView2<f64>,
    labels: &[usize],
    config: &PerturbConfig,
) -> Result<ExperimentReport, PerturbError> {
    config.validate()?;
    if points.nrows() != labels.len() {
        return Err(crate::cvi::CviError::LengthMismatch { points: points.nrows(), labels: labels.len() }.into());
    }
    let singletons = find_singleton_clusters(labels);
    let s = singletons.len();
    if s == 0 {
        return Err(PerturbError::NoSingletons);
    }
    if s > MAX_SINGLETONS {
        return Err(PerturbError::TooManySingletons(s));
    }

    let rows = (0..1usize << s)
        .into_par_iter()
        .map(|r| {
            let included: Vec<bool> = (0..s).map(|i| r >> (s - 1 - i) & 1 == 1).collect();
            let dropped: Vec<usize> =
                singletons.iter().zip(&included).filter(|(_, &kept)| !kept).map(|(&c, _)| c).collect();
            let keep: Vec<usize> = (0..labels.len()).filter(|&i| !dropped.contains(&labels[i])).collect();
            let subset = points.select(Axis(0), &keep);
            let sub_labels = keep.iter().map(|&i| labels[i]).collect();
            let sub_labels = partition_for(subset.view(), sub_labels, config, ExperimentKind::Outliers, r as u64)?;
            Ok(ExperimentRow {
                name: format!("variant_{r}"),
                included,
                trial: None,
                report: evaluate_partition(subset.view(), &sub_labels),
            })
        })
        .collect::<Result<Vec<_>, PerturbError>>()?;

    let mut report = ExperimentReport {
        kind: ExperimentKind::Outliers,
        config: config.clone(),
        baseline: evaluate_partition(points, labels),
        singleton_clusters: singletons,
        rows,
        average: None,
        verdicts: BTreeMap::new(),
        sign_tests: BTreeMap::new(),
    };
    report.verdicts = super::judge_hypothesis(&report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvi::CviIndex;
    use crate::perturb::Verdict;
    use ndarray::{array, Array2};

    #[test]
    fn singletons_are_found_in_order() {
        assert_eq!(find_singleton_clusters(&[3, 0, 0, 2, 1, 1]), vec![2, 3]);
        assert!(find_singleton_clusters(&[0, 0, 1, 1]).is_empty());
        assert_eq!(find_singleton_clusters(&[2, 0, 1]), vec![0, 1, 2]);
        assert!(find_singleton_clusters(&[]).is_empty());
    }

    /// Two pairs on a line plus far singletons.
    fn with_far_singletons() -> (Array2<f64>, Vec<usize>) {
        let p = array![[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 0.0], [100.0, 50.0], [-80.0, 90.0], [40.0, -120.0]];
        (p, vec![0, 0, 1, 1, 2, 3, 4])
    }

    #[test]
    fn rows_enumerate_subsets_in_counting_order() {
        let (p, l) = with_far_singletons();
        let report = outlier_experiment(p.view(), &l, &PerturbConfig::default()).unwrap();
        assert_eq!(report.singleton_clusters, vec![2, 3, 4]);
        assert_eq!(report.rows.len(), 8);
        assert_eq!(report.rows[0].included, vec![false, false, false]);
        assert_eq!(report.rows[1].included, vec![false, false, true]);
        assert_eq!(report.rows[4].included, vec![true, false, false]);
        assert_eq!(report.rows[7].included, vec![true, true, true]);
        assert_eq!(report.rows[0].report.k_effective, 2);
        assert_eq!(report.rows[7].report, report.baseline);
    }

    #[test]
    fn far_singletons_leave_dunn_alone() {
        let (p, l) = with_far_singletons();
        let report = outlier_experiment(p.view(), &l, &PerturbConfig::default()).unwrap();
        let di: Vec<f64> = report.rows.iter().map(|r| r.report.di.unwrap()).collect();
        assert!(di.iter().all(|&v| v == di[0]), "{di:?}");
        assert_eq!(report.verdicts[&CviIndex::Dunn], Verdict::Unaffected);
        let sh = |r: usize| report.rows[r].report.sh.unwrap();
        assert!(sh(0) > sh(7));
    }

    #[test]
    fn no_singletons_is_an_error() {
        let p = array![[0.0], [1.0], [5.0], [6.0]];
        assert!(matches!(
            outlier_experiment(p.view(), &[0, 0, 1, 1], &PerturbConfig::default()),
            Err(PerturbError::NoSingletons)
        ));
    }

    #[test]
    fn reclustering_is_deterministic() {
        let (p, l) = with_far_singletons();
        let config = PerturbConfig { recluster: Some(crate::cluster::FcmConfig::new(2)), ..Default::default() };
        let a = outlier_experiment(p.view(), &l, &config).unwrap();
        let b = outlier_experiment(p.view(), &l, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows[0].report.k_effective, 2);
    }
}
