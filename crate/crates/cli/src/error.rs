use std::io;
use std::path::PathBuf;

use cvilab::{CviError, FcmError, PcaError, PerturbError, ProfileError};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("missing artifact {0}; run the stage that produces it first")]
    MissingArtifact(String),
    #[error("malformed artifact {file}: {reason}")]
    BadArtifact { file: String, reason: String },
    #[error("artifact {0} does not match the digest recorded in the manifest")]
    DigestMismatch(String),
    #[error(transparent)]
    Profiles(#[from] ProfileError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Fcm(#[from] FcmError),
    #[error(transparent)]
    Cvi(#[from] CviError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::MissingArtifact(_) => "missing_artifact",
            CliError::BadArtifact { .. } => "bad_artifact",
            CliError::DigestMismatch(_) => "digest_mismatch",
            CliError::Profiles(_) => "profiles",
            CliError::Pca(_) => "pca",
            CliError::Fcm(_) => "fcm",
            CliError::Cvi(_) => "cvi",
            CliError::Perturb(_) => "perturb",
        }
    }

    /// 2 for configuration mistakes, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}
