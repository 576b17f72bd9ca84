//! The stages: preprocess → PCA → fuzzy c-means → indices → experiments.

use std::fs::File;
use std::io::BufReader;

use cvilab::cluster::{fit_fcm, fuzzy_partition_coefficient, select_cluster_count, write_fpc_csv, FpcPoint};
use cvilab::cvi::evaluate_all;
use cvilab::format::sig9;
use cvilab::perturb::{density_experiment, diameter_experiment, outlier_experiment};
use cvilab::profiles::{generate_synthetic, ReadingsCollector};
use cvilab::reduce::{cumulative_explained_variance, fit_pca, project, select_dimensions_elbow, write_cevr_csv};
use cvilab::{ClusterModel, CviReport, ExperimentKind, ExperimentReport, PcaModel, ProfileMatrix};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, OutDir};
use crate::config::{Choice, RunConfig, Space};
use crate::error::CliError;

/// Builds the profile matrix from the configured readings or synthetic recipe.
pub fn load_profiles(config: &RunConfig) -> Result<ProfileMatrix, CliError> {
    if let Some(synth) = &config.synth {
        return Ok(generate_synthetic(&synth.spec(config.synth_seed()))?.profiles);
    }
    let mut collector = ReadingsCollector::new();
    for path in &config.inputs {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        collector.add_csv(&path.display().to_string(), BufReader::new(file))?;
    }
    Ok(ProfileMatrix::from_series(&collector.finish())?)
}

pub fn write_profiles(dir: &OutDir, profiles: &ProfileMatrix) -> Result<(), CliError> {
    dir.write_with(artifacts::PROFILES, |w| profiles.write_csv(w))
}

pub fn read_profiles(dir: &OutDir) -> Result<ProfileMatrix, CliError> {
    let bytes = dir.read(artifacts::PROFILES)?;
    Ok(ProfileMatrix::read_csv(artifacts::PROFILES, bytes.as_slice())?)
}

/// `cluster.json`: the fitted model plus how `d'` and `k` were chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub dprime: usize,
    pub dprime_selection: String,
    pub k_selection: String,
    pub fpc: f64,
    #[serde(flatten)]
    pub model: ClusterModel,
}

/// The fitted models of one run.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub pca: PcaModel,
    pub cevr: Vec<f64>,
    pub clustering: Clustering,
    pub fpc_curve: Vec<FpcPoint>,
}

/// PCA, `d'` selection, and fuzzy c-means in the reduced space.
pub fn fit_models(config: &RunConfig, profiles: &ProfileMatrix) -> Result<Fitted, CliError> {
    let mut pca = fit_pca(profiles.data().view())?;
    let cevr = cumulative_explained_variance(&pca);
    let (dprime, dprime_selection) = match config.dprime {
        Choice::Fixed(d) => (d, "fixed"),
        Choice::Auto => (select_dimensions_elbow(&cevr)?, "elbow"),
    };
    pca.chosen_dprime = dprime;
    let reduced = project(&pca, profiles.data().view(), dprime)?;

    let template = config.fcm_template();
    let (model, fpc_curve, k_selection) = match config.k {
        Choice::Fixed(_) => {
            let model = fit_fcm(reduced.view(), &template)?;
            let fpc = fuzzy_partition_coefficient(model.memberships.view())?;
            (model, vec![FpcPoint { k: template.k, fpc }], "fixed")
        }
        Choice::Auto => {
            let hi = template.k_max.min(reduced.nrows().saturating_sub(1));
            if hi < 2 {
                return Err(CliError::Config(format!(
                    "{} households are too few to choose k by FPC",
                    reduced.nrows()
                )));
            }
            let selection = select_cluster_count(reduced.view(), &template, 2..=hi)?;
            (selection.model, selection.curve, "fpc")
        }
    };
    let fpc = fuzzy_partition_coefficient(model.memberships.view())?;
    Ok(Fitted {
        pca,
        cevr,
        clustering: Clustering {
            dprime,
            dprime_selection: dprime_selection.into(),
            k_selection: k_selection.into(),
            fpc,
            model,
        },
        fpc_curve,
    })
}

/// Two leading principal-component coordinates per household, with its
/// cluster, for plotting.
pub fn scatter_csv(pca: &PcaModel, profiles: &ProfileMatrix, labels: &[usize], w: &mut Vec<u8>) -> Result<(), CliError> {
    use std::io::Write;
    let dims = pca.component_count().min(2);
    let xy = project(pca, profiles.data().view(), dims)?;
    let io = |e| CliError::io(artifacts::SCATTER, e);
    writeln!(w, "x,y,cluster").map_err(io)?;
    for (row, label) in xy.outer_iter().zip(labels) {
        let y = if dims > 1 { row[1] } else { 0.0 };
        writeln!(w, "{},{},{label}", sig9(row[0]), sig9(y)).map_err(io)?;
    }
    Ok(())
}

pub fn write_fitted(dir: &OutDir, profiles: &ProfileMatrix, fitted: &Fitted) -> Result<(), CliError> {
    dir.write_json(artifacts::PCA, &fitted.pca)?;
    dir.write_with(artifacts::CEVR, |w| write_cevr_csv(w, &fitted.cevr))?;
    dir.write_json(artifacts::CLUSTER, &fitted.clustering)?;
    dir.write_with(artifacts::FPC, |w| write_fpc_csv(w, &fitted.fpc_curve))?;
    let mut scatter = Vec::new();
    scatter_csv(&fitted.pca, profiles, &fitted.clustering.model.labels, &mut scatter)?;
    dir.write(artifacts::SCATTER, &scatter)
}

/// The points the indices and experiments work on.
pub fn scoring_points(config: &RunConfig, profiles: &ProfileMatrix, pca: &PcaModel) -> Result<Array2<f64>, CliError> {
    match config.space {
        Space::Reduced => Ok(project(pca, profiles.data().view(), pca.chosen_dprime)?),
        Space::Original => Ok(profiles.data().clone()),
    }
}

/// `cvi.json`: the pipeline's indices and the space they were computed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CviArtifact {
    pub space: String,
    #[serde(flatten)]
    pub report: CviReport,
}

pub fn validate(config: &RunConfig, points: &Array2<f64>, clustering: &Clustering) -> CviArtifact {
    CviArtifact { space: config.space.name().into(), report: evaluate_all(points.view(), &clustering.model) }
}

pub fn run_experiment_on(
    kind: ExperimentKind,
    config: &RunConfig,
    points: &Array2<f64>,
    labels: &[usize],
) -> Result<ExperimentReport, CliError> {
    let perturb = config.perturb_config();
    let run = match kind {
        ExperimentKind::Outliers => outlier_experiment,
        ExperimentKind::Density => density_experiment,
        ExperimentKind::Diameter => diameter_experiment,
    };
    Ok(run(points.view(), labels, &perturb)?)
}

pub fn write_experiment(dir: &OutDir, report: &ExperimentReport) -> Result<(), CliError> {
    dir.write_json(&artifacts::experiment_json(report.kind), report)?;
    dir.write_with(&artifacts::experiment_csv(report.kind), |w| report.write_csv(w))
}

/// A completed pipeline, in memory.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub profiles: ProfileMatrix,
    pub fitted: Fitted,
    pub points: Array2<f64>,
    pub cvi: CviArtifact,
}

impl PipelineRun {
    pub fn pca(&self) -> &PcaModel {
        &self.fitted.pca
    }

    pub fn model(&self) -> &ClusterModel {
        &self.fitted.clustering.model
    }
}

/// Preprocess → PCA → fuzzy c-means → indices, writing every artifact.
pub fn run_pipeline_into(config: &RunConfig, dir: &OutDir) -> Result<PipelineRun, CliError> {
    let profiles = load_profiles(config)?;
    write_profiles(dir, &profiles)?;
    let fitted = fit_models(config, &profiles)?;
    write_fitted(dir, &profiles, &fitted)?;
    let points = scoring_points(config, &profiles, &fitted.pca)?;
    let cvi = validate(config, &points, &fitted.clustering);
    dir.write_json(artifacts::CVI, &cvi)?;
    Ok(PipelineRun { profiles, fitted, points, cvi })
}

/// Loads a pipeline's models from `dir`.
pub fn load_pipeline(config: &RunConfig, dir: &OutDir) -> Result<(ProfileMatrix, PcaModel, Clustering, Array2<f64>), CliError> {
    let profiles = read_profiles(dir)?;
    let pca: PcaModel = dir.read_json(artifacts::PCA)?;
    let clustering: Clustering = dir.read_json(artifacts::CLUSTER)?;
    if clustering.model.labels.len() != profiles.len() {
        return Err(CliError::BadArtifact {
            file: artifacts::CLUSTER.into(),
            reason: format!("{} labels for {} households", clustering.model.labels.len(), profiles.len()),
        });
    }
    let points = scoring_points(config, &profiles, &pca)?;
    Ok((profiles, pca, clustering, points))
}
