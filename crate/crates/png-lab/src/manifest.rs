//! Run manifests: everything needed to reproduce a result table byte for
//! byte (experiment, effective config, master seed, code version) plus
//! SHA-256 digests of every output file. Timestamps are informational; the
//! reproducibility contract covers the tables, not the manifest itself.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::LabResult;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub master_seed: u64,
    pub threads: usize,
    pub code_version: String,
    pub thresholds_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Manifest {
    pub fn write(&self, path: &Path) -> LabResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            crate::error::LabError::runtime(format!(
                "bad manifest {}: {e}",
                path.display()
            ))
        })
    }
}
