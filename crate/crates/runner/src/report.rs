use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use krein_core::io::CacheStatus;

/// Outcome of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub inputs_hash: String,
    pub pass: bool,
    pub runtime_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<CacheStatus>,
    pub observed: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub global_pass: bool,
    pub experiments: Vec<ExperimentRecord>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn experiment(&self, name: &str) -> Option<&ExperimentRecord> {
        self.experiments.iter().find(|e| e.name == name)
    }

    /// Hash over everything except timings, cache status and artifact paths.
    pub fn fingerprint(&self) -> String {
        let stable: Vec<_> = self
            .experiments
            .iter()
            .map(|e| (&e.name, &e.inputs_hash, e.pass, &e.observed, &e.error))
            .collect();
        let bytes = serde_json::to_vec(&(&self.scenario, self.seed, self.global_pass, stable)).expect("report serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn short_hash(value: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(value).expect("inputs serialize");
    hex(&Sha256::digest(bytes)[..8])
}
