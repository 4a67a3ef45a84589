//! Per-command manifests: what ran, with which settings, and what it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
    /// Some but not all requested artifacts were produced.
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the manifest's directory when it lies below it.
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl Artifact {
    pub fn hash(path: &Path, base: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.strip_prefix(base).unwrap_or(path).to_path_buf(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub status: Status,
    pub error: Option<String>,
    pub run_id: String,
    pub seed: u64,
    pub version: String,
    pub argv: Vec<String>,
    /// The fully resolved configuration; rerun with it as `--config`.
    pub config: RunConfig,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, argv: &[String]) -> Self {
        Self {
            command: command.into(),
            status: Status::Ok,
            error: None,
            run_id: config.run_id(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            argv: argv.to_vec(),
            config: config.clone(),
            artifacts: Vec::new(),
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest-{command}.json")
    }

    /// Hashes every existing path in `files` and writes
    /// `manifest-<command>.json` into `dir`.
    pub fn write(mut self, dir: &Path, files: &[PathBuf]) -> Result<PathBuf> {
        self.artifacts = files
            .iter()
            .filter(|f| f.is_file())
            .map(|f| Artifact::hash(f, dir))
            .collect::<Result<_>>()?;
        let path = dir.join(Self::file_name(&self.command));
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn failed(mut self, err: &Error) -> Self {
        self.status = Status::Failed;
        self.error = Some(err.to_string());
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
