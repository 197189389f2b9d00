use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::store::write_atomic;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    /// Digest of the file at `path`, recorded under its absolute path.
    pub fn of(path: &Path) -> Result<Self> {
        let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut h = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
            if n == 0 {
                break;
            }
            h.update(&buf[..n]);
            bytes += n as u64;
        }
        Ok(FileDigest {
            path: std::path::absolute(path).map_err(|e| Error::io(path, e))?,
            bytes,
            sha256: hex::encode(h.finalize()),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub argv: Vec<String>,
    /// Effective configuration after flag / file / default resolution.
    pub config: Value,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub counts: BTreeMap<String, f64>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub run_id: String,
    pub tool_version: String,
    pub stages: Vec<StageRecord>,
}

impl PipelineManifest {
    pub fn new(run_id: String) -> Self {
        PipelineManifest {
            run_id,
            tool_version: TOOL_VERSION.to_string(),
            stages: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Loads `path` if present; otherwise starts a manifest whose run id is
    /// derived from the first stage's configuration.
    pub fn load_or_new(path: &Path, first_stage: &StageRecord) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new(format!("run-{}", &first_stage.config_sha256[..16])))
        }
    }

    /// Stages are append-only.
    pub fn append(&mut self, stage: StageRecord) {
        self.stages.push(stage);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    /// Outputs whose current content no longer matches the recorded digest
    /// (including files that disappeared), keeping only the latest record
    /// of each path.
    pub fn verify(&self) -> Vec<(PathBuf, String)> {
        let mut latest: BTreeMap<&Path, &FileDigest> = BTreeMap::new();
        for s in &self.stages {
            for o in &s.outputs {
                latest.insert(o.path.as_path(), o);
            }
        }
        latest
            .into_values()
            .filter_map(|d| match FileDigest::of(&d.path) {
                Ok(now) if now.sha256 == d.sha256 && now.bytes == d.bytes => None,
                Ok(_) => Some((d.path.clone(), "digest changed".to_string())),
                Err(e) => Some((d.path.clone(), e.to_string())),
            })
            .collect()
    }
}
