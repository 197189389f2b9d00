//! Checkpoints: raw f32 little-endian tensor blob at `path`, JSON manifest
//! at `path.json` listing every tensor's name, shape and byte offset.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::params::{Architecture, NetworkParams};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::store::write_atomic;

pub const FORMAT: &str = "urbanfold-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams<f32>,
    pub adam: AdamState<f32>,
    /// Completed epochs.
    pub epoch: usize,
    pub config: TrainConfig,
    pub loss_curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    architecture: Architecture,
    step: u64,
    epoch: usize,
    config: TrainConfig,
    loss_curve: Vec<f64>,
    blob_bytes: u64,
    tensors: Vec<TensorEntry>,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Storage order: parameters, then Adam first moments, then second moments.
fn sections(ck: &Checkpoint) -> [(&'static str, &NetworkParams<f32>); 3] {
    [("", &ck.params), ("adam.m.", &ck.adam.m), ("adam.v.", &ck.adam.v)]
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<(Vec<u8>, Vec<u8>)> {
        let mut blob = Vec::new();
        let mut tensors = Vec::new();
        for (prefix, p) in sections(self) {
            for (name, t) in p.names.iter().zip(&p.tensors) {
                tensors.push(TensorEntry {
                    name: format!("{prefix}{name}"),
                    shape: t.shape.clone(),
                    offset: blob.len() as u64,
                });
                for v in &t.data {
                    blob.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let manifest = Manifest {
            format: FORMAT.into(),
            version: VERSION,
            architecture: self.params.arch.clone(),
            step: self.adam.step,
            epoch: self.epoch,
            config: self.config.clone(),
            loss_curve: self.loss_curve.clone(),
            blob_bytes: blob.len() as u64,
            tensors,
        };
        Ok((blob, serde_json::to_vec_pretty(&manifest)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let (blob, manifest) = self.to_bytes()?;
        write_atomic(path, &blob)?;
        write_atomic(&manifest_path(path), &manifest)
    }

    pub fn from_bytes(blob: &[u8], manifest: &[u8]) -> Result<Self> {
        let m: Manifest = serde_json::from_slice(manifest)?;
        if m.format != FORMAT || m.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} version {}",
                m.format, m.version
            )));
        }
        if blob.len() as u64 != m.blob_bytes {
            return Err(Error::Checkpoint(format!(
                "blob is {} bytes, manifest says {} (truncated?)",
                blob.len(),
                m.blob_bytes
            )));
        }
        m.architecture.validate()?;
        let mut params = NetworkParams::<f32>::zeros(&m.architecture);
        let mut adam = AdamState::new(&params);
        adam.step = m.step;
        let mut entries = m.tensors.iter();
        let targets: [(&str, &mut NetworkParams<f32>); 3] =
            [("", &mut params), ("adam.m.", &mut adam.m), ("adam.v.", &mut adam.v)];
        for (prefix, p) in targets {
            for (name, t) in p.names.iter().zip(p.tensors.iter_mut()) {
                let full = format!("{prefix}{name}");
                let e = entries.next().ok_or_else(|| Error::TensorShape {
                    name: full.clone(),
                    expected: t.shape.clone(),
                    found: vec![],
                })?;
                if e.name != full || e.shape != t.shape {
                    return Err(Error::TensorShape {
                        name: full,
                        expected: t.shape.clone(),
                        found: e.shape.clone(),
                    });
                }
                let start = e.offset as usize;
                let end = start + t.data.len() * 4;
                let bytes = blob.get(start..end).ok_or_else(|| {
                    Error::Checkpoint(format!("tensor {full} lies outside the blob"))
                })?;
                for (v, c) in t.data.iter_mut().zip(bytes.chunks_exact(4)) {
                    *v = f32::from_le_bytes(c.try_into().unwrap());
                }
            }
        }
        if entries.next().is_some() {
            return Err(Error::Checkpoint("manifest lists extra tensors".into()));
        }
        Ok(Checkpoint {
            params,
            adam,
            epoch: m.epoch,
            config: m.config,
            loss_curve: m.loss_curve,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let blob = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mp = manifest_path(path);
        let manifest = fs::read(&mp).map_err(|e| Error::io(&mp, e))?;
        Self::from_bytes(&blob, &manifest)
    }

    /// Loads and checks the stored network against `arch`, naming the first
    /// tensor whose shape differs.
    pub fn load_expecting(path: &Path, arch: &Architecture) -> Result<Self> {
        let ck = Self::load(path)?;
        NetworkParams::<f32>::zeros(arch).check_layout(&ck.params)?;
        if ck.params.arch != *arch {
            return Err(Error::Checkpoint(format!(
                "architecture differs: stored {:?}, expected {arch:?}",
                ck.params.arch
            )));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foldnet::train::Preset;

    fn sample() -> Checkpoint {
        let config = TrainConfig::preset(Preset::Desk);
        let params = NetworkParams::<f32>::init(&config.architecture(), 3).unwrap();
        let mut adam = AdamState::new(&params);
        adam.step = 7;
        adam.m.tensors[2].data[1] = 0.125;
        adam.v.tensors[5].data[0] = 3.5e-7;
        Checkpoint {
            params,
            adam,
            epoch: 4,
            config,
            loss_curve: vec![0.5, 0.25, 0.1 + 0.2, 1.0 / 3.0],
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        let ck = sample();
        ck.save(&a).unwrap();
        let back = Checkpoint::load(&a).unwrap();
        assert_eq!(back, ck);
        back.save(&b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(
            fs::read(manifest_path(&a)).unwrap(),
            fs::read(manifest_path(&b)).unwrap()
        );
    }

    #[test]
    fn truncated_blob_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        sample().save(&a).unwrap();
        let bytes = fs::read(&a).unwrap();
        fs::write(&a, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(Checkpoint::load(&a), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn wrong_codeword_dim_names_bottleneck() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        sample().save(&a).unwrap();
        let other = Architecture::desk(8);
        match Checkpoint::load_expecting(&a, &other) {
            Err(Error::TensorShape { name, .. }) => assert_eq!(name, "encoder.bottleneck.weight"),
            other => panic!("{other:?}"),
        }
    }
}
