//! Run manifest: everything needed to replay a run, serialized as
//! JSON next to the outputs.

use crate::acquisition::AcquisitionSpec;
use crate::trainer::TrainConfig;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ProfileSource {
    File(String),
    Parametric {
        shape: String,
        fwhm_mm: f64,
        taps: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub input: String,
    pub output: String,
    pub spec: AcquisitionSpec,
    pub through_axis: usize,
    pub profile: ProfileSource,
    pub train: TrainConfig,
    pub seed: u64,
    pub elapsed_seconds: f64,
    pub parameter_bytes: usize,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| crate::error::Error::Malformed {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}
