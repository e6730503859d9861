//! Resolved run configuration, echoed into every emitted artifact.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tracemark_core::harness::SchemeTemplate;
use tracemark_core::ProbeConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Global seed; every subsystem derives its own stream from it.
    pub seed: u64,
    pub manifest: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub ledger: Option<PathBuf>,
    pub detector: Option<PathBuf>,
    pub scheme: SchemeTemplate,
    pub probe: ProbeConfig,
    /// Creation stamp recorded in ledger entries. Left unset by default so
    /// identical flags keep producing identical bytes; pass a value to
    /// record wall-clock provenance.
    pub created: Option<String>,
}

/// An emitted artifact: the payload plus the configuration that produced
/// it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub config: RunConfig,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Artifact<T> {
    pub fn new(config: RunConfig, body: T) -> Self {
        Artifact { config, body }
    }

    pub fn to_json_pretty(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
