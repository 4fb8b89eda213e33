//! Portable JSON map artifact.
//!
//! The artifact stores the raw workspace, the solver settings and the full
//! solution (every piece's nodes, constant and boundary values). Floats are
//! written with round-trip precision, so a reloaded map evaluates bit for bit
//! like the one that was saved.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{validate_workspace, PolygonalWorkspace, ValidatedWorkspace};
use crate::koebe::{KoebeConfig, KoebeSolution};
use crate::navmap::NavigationMap;

pub const ARTIFACT_FORMAT: &str = "confnav-map/1";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("map artifact is corrupt: {0}")]
    ArtifactCorrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapArtifact {
    pub format: String,
    pub workspace: PolygonalWorkspace,
    pub config: KoebeConfig,
    pub solution: KoebeSolution,
}

/// An artifact whose contents have been checked for consistency.
#[derive(Debug, Clone)]
pub struct LoadedMap {
    pub workspace: ValidatedWorkspace,
    pub config: KoebeConfig,
    pub solution: KoebeSolution,
    pub map: NavigationMap,
}

impl MapArtifact {
    pub fn new(workspace: &ValidatedWorkspace, config: KoebeConfig, solution: KoebeSolution) -> Self {
        MapArtifact { format: ARTIFACT_FORMAT.to_string(), workspace: workspace.to_raw(), config, solution }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("artifact values are finite")
    }

    pub fn from_json(text: &str) -> Result<LoadedMap, ArtifactError> {
        let corrupt = |m: String| ArtifactError::ArtifactCorrupt(m);
        let a: MapArtifact = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        if a.format != ARTIFACT_FORMAT {
            return Err(corrupt(format!("unknown format {:?}", a.format)));
        }
        let ws = validate_workspace(&a.workspace).map_err(|e| corrupt(format!("workspace: {e}")))?;
        let s = &a.solution;
        if s.boundaries.len() != ws.obstacles().len() + 1 || s.sphere_world.circles.len() != ws.obstacles().len() {
            return Err(corrupt("boundary count does not match the workspace".into()));
        }
        for (i, b) in s.boundaries.iter().enumerate() {
            if b.images.len() != b.original.len() || b.original.points.len() != b.original.derivatives.len() {
                return Err(corrupt(format!("boundary {i} has mismatched node arrays")));
            }
        }
        let map = NavigationMap::new(&ws, s);
        Ok(LoadedMap { workspace: ws, config: a.config, solution: a.solution, map })
    }

    pub fn load(path: &std::path::Path) -> Result<LoadedMap, ArtifactError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
