use std::path::Path;

use confnav::geometry::GeometryError;
use confnav::io::ArtifactError;
use confnav::koebe::KoebeError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid workspace: {0}")]
    InvalidWorkspace(#[from] GeometryError),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("no map artifact at {0}; run `confnav solve` first")]
    MissingMapArtifact(String),
    #[error("{0}")]
    ArtifactCorrupt(String),
    #[error(transparent)]
    Solver(#[from] KoebeError),
    #[error("{0} invariant families failed")]
    VerificationFailed(usize),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    /// 2 for bad input, 1 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(KoebeError::Boundary(_)) => 2,
            CliError::Solver(_) | CliError::VerificationFailed(_) => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> String {
        match self {
            CliError::Parse(_) => "ParseError".into(),
            CliError::Io { .. } => "IoError".into(),
            CliError::InvalidWorkspace(e) => variant_name(e),
            CliError::InvalidSettings(_) => "InvalidSettings".into(),
            CliError::MissingMapArtifact(_) => "MissingMapArtifact".into(),
            CliError::ArtifactCorrupt(_) => "ArtifactCorrupt".into(),
            CliError::Solver(KoebeError::Solver { source, .. }) => variant_name(source),
            CliError::Solver(KoebeError::Boundary(e)) => variant_name(e),
            CliError::Solver(e) => variant_name(e),
            CliError::VerificationFailed(_) => "VerificationFailed".into(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        CliError::ArtifactCorrupt(e.to_string())
    }
}

/// Leading identifier of the `Debug` form, which is the variant name.
fn variant_name(e: &impl std::fmt::Debug) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("Error").to_string()
}
