//! Detector persistence: weights, bias, standardization statistics,
//! threshold, and the feature recipe, wrapped with the producing config.

use std::fs;
use std::path::Path;

use tracemark_core::Detector;

use crate::config::{Artifact, RunConfig};
use crate::error::{CliError, CliResult};

pub fn save_detector(detector: &Detector, config: &RunConfig, path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(anyhow::Error::from)?;
    }
    let artifact = Artifact::new(config.clone(), detector.clone());
    fs::write(path, artifact.to_json_pretty().map_err(anyhow::Error::from)?)
        .map_err(anyhow::Error::from)?;
    Ok(())
}

pub fn load_detector(path: &Path) -> CliResult<Detector> {
    let data = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read detector {}: {e}", path.display())))?;
    let artifact: Artifact<Detector> = serde_json::from_str(&data)
        .map_err(|e| CliError::Input(format!("corrupt detector {}: {e}", path.display())))?;
    Ok(artifact.body)
}
