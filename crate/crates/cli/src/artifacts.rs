//! The output directory: artifact files and the manifest that lists them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const PROFILES: &str = "profiles.csv";
pub const PCA: &str = "pca.json";
pub const CEVR: &str = "cevr.csv";
pub const CLUSTER: &str = "cluster.json";
pub const FPC: &str = "fpc.csv";
pub const SCATTER: &str = "scatter2d.csv";
pub const CVI: &str = "cvi.json";
pub const SUMMARY: &str = "summary.txt";
pub const MANIFEST: &str = "manifest.json";

/// Every file a run may produce besides the manifest, in listing order.
pub fn known_artifacts() -> Vec<String> {
    let mut names: Vec<String> = [PROFILES, PCA, CEVR, CLUSTER, FPC, SCATTER, CVI].map(String::from).to_vec();
    for kind in cvilab::ExperimentKind::ALL {
        names.push(experiment_json(kind));
        names.push(experiment_csv(kind));
    }
    names.push(SUMMARY.to_string());
    names
}

pub fn experiment_json(kind: cvilab::ExperimentKind) -> String {
    format!("experiment_{kind}.json")
}

pub fn experiment_csv(kind: cvilab::ExperimentKind) -> String {
    format!("experiment_{kind}.csv")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone)]
pub struct OutDir {
    path: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.file(name).is_file()
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.file(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(path, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifacts serialize");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes a text artifact produced by `fill`.
    pub fn write_with<E>(&self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Result<(), CliError>
    where
        E: std::fmt::Display,
    {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| CliError::BadArtifact { file: name.to_string(), reason: e.to_string() })?;
        self.write(name, &buf)
    }

    pub fn read(&self, name: &str) -> Result<Vec<u8>, CliError> {
        if !self.exists(name) {
            return Err(CliError::MissingArtifact(name.to_string()));
        }
        let path = self.file(name);
        fs::read(&path).map_err(|e| CliError::io(path, e))
    }

    pub fn read_json<T: for<'de> Deserialize<'de>>(&self, name: &str) -> Result<T, CliError> {
        let bytes = self.read(name)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::BadArtifact { file: name.to_string(), reason: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    /// A path, or `synthetic` for a generated population.
    pub source: String,
    pub sha256: String,
}

/// What produced the directory's contents. `created_at` is the only
/// field that differs between identical runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub created_at: String,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Digests of the run's data sources: each input file, or the synthetic
/// recipe.
pub fn input_digests(config: &RunConfig) -> Result<Vec<InputDigest>, CliError> {
    if let Some(synth) = &config.synth {
        let recipe = format!(
            "synthetic clusters={} size={} spread={} outliers={} placement={:?} seed={}",
            synth.clusters,
            synth.size,
            synth.spread,
            synth.outliers,
            synth.placement,
            config.synth_seed()
        );
        return Ok(vec![InputDigest { source: "synthetic".into(), sha256: sha256_hex(recipe.as_bytes()) }]);
    }
    config
        .inputs
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
            Ok(InputDigest { source: p.display().to_string(), sha256: sha256_hex(&bytes) })
        })
        .collect()
}

/// Lists and digests every known artifact present in `dir`, writes
/// `manifest.json`, then re-reads everything and checks the digests.
pub fn write_manifest(dir: &OutDir, command: &str, config: &RunConfig) -> Result<RunManifest, CliError> {
    let mut artifacts = Vec::new();
    for name in known_artifacts() {
        if dir.exists(&name) {
            let bytes = dir.read(&name)?;
            artifacts.push(ArtifactEntry { sha256: sha256_hex(&bytes), bytes: bytes.len() as u64, file: name });
        }
    }
    let manifest = RunManifest {
        tool: "cvilab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: config.seed,
        config: config.echo(),
        inputs: input_digests(config)?,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        artifacts,
    };
    dir.write_json(MANIFEST, &manifest)?;
    verify_manifest(dir)?;
    Ok(manifest)
}

/// Checks every file listed in the directory's manifest against its digest.
pub fn verify_manifest(dir: &OutDir) -> Result<RunManifest, CliError> {
    let manifest: RunManifest = dir.read_json(MANIFEST)?;
    for entry in &manifest.artifacts {
        let bytes = dir.read(&entry.file)?;
        if sha256_hex(&bytes) != entry.sha256 || bytes.len() as u64 != entry.bytes {
            return Err(CliError::DigestMismatch(entry.file.clone()));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn tampering_is_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = OutDir::create(tmp.path()).unwrap();
        dir.write(CEVR, b"k,cevr\n1,1\n").unwrap();
        let settings = crate::config::Settings::parse("synth-clusters = 2\n", "t", None).unwrap();
        let config = RunConfig::from_settings(&settings).unwrap();
        let manifest = write_manifest(&dir, "test", &config).unwrap();
        assert_eq!(manifest.artifacts.len(), 1);
        dir.write(CEVR, b"k,cevr\n1,0.5\n").unwrap();
        assert!(matches!(verify_manifest(&dir), Err(CliError::DigestMismatch(f)) if f == CEVR));
    }
}
