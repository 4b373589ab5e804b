//! On-disk model registry: `models/registry.json` plus one model file per
//! version. Versions are append-only and numbered from 1.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use fnvd_core::data::{to_csv, Dataset};
use fnvd_core::lmt::{deserialize_model, serialize_model, LmtModel, TrainParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ServiceError;

pub const REGISTRY_FILE: &str = "registry.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVersion {
    pub version: u64,
    /// File name inside the registry directory.
    pub file: String,
    pub params: TrainParams,
    /// sha256 of the training data in CSV form; absent for imported models.
    pub dataset_digest: Option<String>,
    pub created_at: DateTime<Utc>,
    pub source: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RegistryFile {
    versions: Vec<ModelVersion>,
    active: Option<u64>,
}

#[derive(Debug)]
pub struct ModelRegistry {
    dir: PathBuf,
    state: RegistryFile,
}

pub fn dataset_digest(ds: &Dataset) -> String {
    hex::encode(Sha256::digest(to_csv(ds).as_bytes()))
}

impl ModelRegistry {
    pub fn open(dir: &Path) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(REGISTRY_FILE);
        let state = if path.exists() {
            serde_json::from_str(&std::fs::read_to_string(&path)?)
                .map_err(|e| ServiceError::CorruptStore(format!("{}: {e}", path.display())))?
        } else {
            RegistryFile::default()
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            state,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn versions(&self) -> &[ModelVersion] {
        &self.state.versions
    }

    pub fn active(&self) -> Option<u64> {
        self.state.active
    }

    pub fn latest(&self) -> Option<u64> {
        self.state.versions.last().map(|v| v.version)
    }

    fn entry(&self, version: u64) -> Result<&ModelVersion, ServiceError> {
        self.state
            .versions
            .iter()
            .find(|v| v.version == version)
            .ok_or(ServiceError::UnknownVersion(version))
    }

    pub fn model_path(&self, version: u64) -> Result<PathBuf, ServiceError> {
        Ok(self.dir.join(&self.entry(version)?.file))
    }

    pub fn load(&self, version: u64) -> Result<LmtModel, ServiceError> {
        let text = std::fs::read_to_string(self.model_path(version)?)?;
        Ok(deserialize_model(&text)?)
    }

    fn save(&self) -> Result<(), ServiceError> {
        let tmp = self.dir.join(format!("{REGISTRY_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_string_pretty(&self.state).expect("registry serializes"))?;
        std::fs::rename(&tmp, self.dir.join(REGISTRY_FILE))?;
        Ok(())
    }

    /// Store `model` as the next version. Does not activate it.
    pub fn register(
        &mut self,
        model: &LmtModel,
        dataset_digest: Option<String>,
        source: &str,
    ) -> Result<u64, ServiceError> {
        let version = self.latest().unwrap_or(0) + 1;
        let file = format!("model-v{version}.json");
        std::fs::write(self.dir.join(&file), serialize_model(model))?;
        self.state.versions.push(ModelVersion {
            version,
            file,
            params: model.training_meta.params.clone(),
            dataset_digest,
            created_at: Utc::now(),
            source: source.to_string(),
        });
        self.save()?;
        Ok(version)
    }

    /// Mark `version` active after checking that its file loads.
    pub fn activate(&mut self, version: u64) -> Result<LmtModel, ServiceError> {
        let model = self.load(version)?;
        self.state.active = Some(version);
        self.save()?;
        Ok(model)
    }
}
