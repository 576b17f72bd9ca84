//! The human-readable summary of a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use cvilab::format::sig9;
use cvilab::perturb::judge_hypothesis;
use cvilab::{CviIndex, ExperimentKind, ExperimentReport, PcaModel, Verdict};

use crate::artifacts::{self, OutDir};
use crate::error::CliError;
use crate::pipeline::{Clustering, CviArtifact};

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    /// Verdicts per experiment found in the directory, judged afresh from
    /// the serialized reports.
    pub verdicts: BTreeMap<ExperimentKind, BTreeMap<CviIndex, Verdict>>,
}

fn value(v: Option<f64>, infinite: bool) -> String {
    match v {
        Some(v) => sig9(v),
        None if infinite => "inf".into(),
        None => "n/a".into(),
    }
}

fn from_report(r: &cvilab::CviReport, index: CviIndex) -> String {
    value(r.get(index), r.is_infinite(index))
}

/// Reads the run artifacts in `dir` and writes `summary.txt`. `skipped`
/// explains experiments that were requested but could not run.
pub fn emit_report(dir: &OutDir, skipped: &BTreeMap<ExperimentKind, String>) -> Result<Summary, CliError> {
    let pca: PcaModel = dir.read_json(artifacts::PCA)?;
    let clustering: Clustering = dir.read_json(artifacts::CLUSTER)?;
    let cvi: CviArtifact = dir.read_json(artifacts::CVI)?;

    let mut t = String::new();
    let model = &clustering.model;
    let _ = writeln!(t, "cvilab summary\n");
    let _ = writeln!(t, "households    {}", model.labels.len());
    let _ = writeln!(t, "dimensions    {} -> {} ({})", pca.dimension(), clustering.dprime, clustering.dprime_selection);
    let _ = writeln!(t, "clusters      {} ({}, FPC {})", model.k(), clustering.k_selection, sig9(clustering.fpc));
    let _ = writeln!(t, "fuzzifier     {}", sig9(model.fuzzifier));
    let _ = writeln!(t, "index space   {}", cvi.space);
    if !model.empty_clusters.is_empty() {
        let _ = writeln!(t, "empty         {:?}", model.empty_clusters);
    }
    let _ = writeln!(t, "\nindex  value");
    for index in CviIndex::ALL {
        let _ = writeln!(t, "{:<6} {}", index.to_string(), from_report(&cvi.report, index));
    }

    let mut verdicts = BTreeMap::new();
    for kind in ExperimentKind::ALL {
        let name = artifacts::experiment_json(kind);
        if !dir.exists(&name) {
            if let Some(reason) = skipped.get(&kind) {
                let _ = writeln!(t, "\nexperiment {kind}: not run ({reason})");
            }
            continue;
        }
        let report: ExperimentReport = dir.read_json(&name)?;
        let judged = judge_hypothesis(&report)?;
        match kind {
            ExperimentKind::Outliers => {
                let labels: Vec<String> = report.singleton_clusters.iter().map(usize::to_string).collect();
                let _ = writeln!(
                    t,
                    "\nexperiment outliers: {} variants over singleton clusters {}",
                    report.rows.len(),
                    labels.join(", ")
                );
                let _ = writeln!(t, "{:<6} {:<14} {:<14} verdict", "index", "all kept", "none kept");
                let none = &report.rows[0].report;
                for index in CviIndex::ALL {
                    let _ = writeln!(
                        t,
                        "{:<6} {:<14} {:<14} {}",
                        index.to_string(),
                        from_report(&report.baseline, index),
                        from_report(none, index),
                        judged[&index]
                    );
                }
            }
            ExperimentKind::Density | ExperimentKind::Diameter => {
                let _ = writeln!(
                    t,
                    "\nexperiment {kind}: {} trials, baseline without singleton clusters",
                    report.rows.len()
                );
                let _ = writeln!(t, "{:<6} {:<14} {:<14} {:<10} verdict", "index", "baseline", "average", "better");
                let avg = report.average.as_ref();
                for index in CviIndex::ALL {
                    let better = report
                        .sign_tests
                        .get(&index)
                        .map_or_else(|| "-".to_string(), |s| format!("{}/{}", s.improved, s.improved + s.worsened));
                    let _ = writeln!(
                        t,
                        "{:<6} {:<14} {:<14} {:<10} {}",
                        index.to_string(),
                        from_report(&report.baseline, index),
                        value(avg.and_then(|a| a.get(index)), false),
                        better,
                        judged[&index]
                    );
                }
            }
        }
        verdicts.insert(kind, judged);
    }
    dir.write(artifacts::SUMMARY, t.as_bytes())?;
    Ok(Summary { text: t, verdicts })
}
