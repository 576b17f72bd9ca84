//! Command-line runs of the cvilab pipeline.
//!
//! Every command reads its settings from an optional config file plus
//! flags (see [`config`]), writes its artifacts into the output directory
//! and finishes by rewriting `manifest.json`, which lists every artifact
//! in the directory with its SHA-256 digest. The manifest is re-read and
//! every digest checked before a command reports success.
//!
//! | command            | reads                                  | writes |
//! |--------------------|----------------------------------------|--------|
//! | `synth`            | synthetic recipe                       | `profiles.csv` |
//! | `preprocess`       | readings CSVs or synthetic recipe      | `profiles.csv` |
//! | `cluster`          | `profiles.csv`                         | `pca.json`, `cevr.csv`, `cluster.json`, `fpc.csv`, `scatter2d.csv` |
//! | `validate`         | profiles, PCA, clustering              | `cvi.json` |
//! | `experiment KIND`  | profiles, PCA, clustering (or data)    | `experiment_KIND.{json,csv}` |
//! | `report`           | everything above                       | `summary.txt` |
//! | `run`              | readings or synthetic recipe           | all of the above |

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

use std::collections::BTreeMap;

use cvilab::{ClusterModel, CviReport, ExperimentKind, ExperimentReport, PcaModel, PerturbError};

pub use artifacts::{OutDir, RunManifest};
pub use config::{RunConfig, Settings};
pub use error::CliError;
pub use report::{emit_report, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Preprocess,
    Cluster,
    Validate,
    Experiment(ExperimentKind),
    Report,
    Run,
}

impl Command {
    pub fn name(self) -> String {
        match self {
            Command::Synth => "synth".into(),
            Command::Preprocess => "preprocess".into(),
            Command::Cluster => "cluster".into(),
            Command::Validate => "validate".into(),
            Command::Experiment(kind) => format!("experiment {kind}"),
            Command::Report => "report".into(),
            Command::Run => "run".into(),
        }
    }

    /// Whether the command needs input data (as opposed to earlier artifacts).
    fn data_source(self) -> config::DataSource {
        match self {
            Command::Synth => config::DataSource::Synthetic,
            Command::Preprocess | Command::Run => config::DataSource::Required,
            _ => config::DataSource::Optional,
        }
    }
}

/// Interprets `settings` for `command`, runs it and writes the manifest.
pub fn execute(command: Command, settings: &Settings) -> Result<RunManifest, CliError> {
    let config = RunConfig::from_settings_for(settings, command.data_source())?;
    let dir = OutDir::create(&config.out)?;
    match command {
        Command::Synth | Command::Preprocess => {
            let profiles = pipeline::load_profiles(&config)?;
            pipeline::write_profiles(&dir, &profiles)?;
        }
        Command::Cluster => {
            let profiles = if dir.exists(artifacts::PROFILES) || config.is_data_free() {
                pipeline::read_profiles(&dir)?
            } else {
                let profiles = pipeline::load_profiles(&config)?;
                pipeline::write_profiles(&dir, &profiles)?;
                profiles
            };
            let fitted = pipeline::fit_models(&config, &profiles)?;
            pipeline::write_fitted(&dir, &profiles, &fitted)?;
        }
        Command::Validate => {
            let (_, _, clustering, points) = pipeline::load_pipeline(&config, &dir)?;
            dir.write_json(artifacts::CVI, &pipeline::validate(&config, &points, &clustering))?;
        }
        Command::Experiment(kind) => {
            run_experiment_in(kind, &config, &dir)?;
        }
        Command::Report => {
            emit_report(&dir, &BTreeMap::new())?;
        }
        Command::Run => {
            let run = pipeline::run_pipeline_into(&config, &dir)?;
            let mut skipped = BTreeMap::new();
            for &kind in &config.experiments {
                match pipeline::run_experiment_on(kind, &config, &run.points, &run.model().labels) {
                    Ok(report) => pipeline::write_experiment(&dir, &report)?,
                    // A partition without singleton clusters has nothing to toggle.
                    Err(CliError::Perturb(PerturbError::NoSingletons)) => {
                        skipped.insert(kind, "the partition has no singleton clusters".to_string());
                    }
                    Err(e) => return Err(e),
                }
            }
            emit_report(&dir, &skipped)?;
        }
    }
    artifacts::write_manifest(&dir, &command.name(), &config)
}

fn run_experiment_in(kind: ExperimentKind, config: &RunConfig, dir: &OutDir) -> Result<ExperimentReport, CliError> {
    let have_models = [artifacts::PROFILES, artifacts::PCA, artifacts::CLUSTER].iter().all(|f| dir.exists(f));
    let (points, labels) = if have_models || config.is_data_free() {
        let (_, _, clustering, points) = pipeline::load_pipeline(config, dir)?;
        (points, clustering.model.labels)
    } else {
        let run = pipeline::run_pipeline_into(config, dir)?;
        let labels = run.model().labels.clone();
        (run.points, labels)
    };
    let report = pipeline::run_experiment_on(kind, config, &points, &labels)?;
    pipeline::write_experiment(dir, &report)?;
    Ok(report)
}

/// Runs preprocess → PCA → fuzzy c-means → indices into `config.out`.
pub fn run_pipeline(config: &RunConfig) -> Result<(PcaModel, ClusterModel, CviReport, RunManifest), CliError> {
    let dir = OutDir::create(&config.out)?;
    let run = pipeline::run_pipeline_into(config, &dir)?;
    let manifest = artifacts::write_manifest(&dir, "pipeline", config)?;
    Ok((run.fitted.pca, run.fitted.clustering.model, run.cvi.report, manifest))
}

/// Runs one experiment in `config.out`, fitting the pipeline first if the
/// directory does not hold one yet.
pub fn run_experiment(kind: ExperimentKind, config: &RunConfig) -> Result<ExperimentReport, CliError> {
    let dir = OutDir::create(&config.out)?;
    let report = run_experiment_in(kind, config, &dir)?;
    artifacts::write_manifest(&dir, &Command::Experiment(kind).name(), config)?;
    Ok(report)
}
