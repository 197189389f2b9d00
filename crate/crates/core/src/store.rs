//! Binary point-cloud (`BPCL`) and embedding (`BEMB`) stores, plus the
//! JSON-lines building store written by ingestion.
//!
//! Both are a 4-byte magic, then little-endian u32 version, row count and
//! row width, then f32 little-endian values row-major. Row ids live in a
//! sidecar JSON array at `<path>.ids.json`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::citygml::BuildingRecord;
use crate::error::{Error, Result};
use crate::mesh::PointCloud;

pub const VERSION: u32 = 1;
const HEADER: usize = 16;

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn ids_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".ids.json");
    PathBuf::from(p)
}

fn encode(magic: &[u8; 4], rows: usize, width: usize, values: impl Iterator<Item = f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + rows * width * 4);
    out.extend_from_slice(magic);
    for v in [VERSION, rows as u32, width as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(magic: &[u8; 4], bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < HEADER {
        return Err(Error::Format(format!("file is {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (rows, width) = (word(8) as usize, word(12) as usize);
    let expected = HEADER + rows * width * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for {rows}×{width} values, found {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, width, values))
}

fn write_ids(path: &Path, ids: &[String]) -> Result<()> {
    write_atomic(&ids_path(path), &serde_json::to_vec(ids)?)
}

fn read_ids(path: &Path, rows: usize) -> Result<Vec<String>> {
    let p = ids_path(path);
    let text = fs::read(&p).map_err(|e| Error::io(&p, e))?;
    let ids: Vec<String> = serde_json::from_slice(&text)?;
    if ids.len() != rows {
        return Err(Error::Format(format!(
            "{} ids for {rows} rows in {}",
            ids.len(),
            p.display()
        )));
    }
    Ok(ids)
}

/// Serializes clouds that all have the same point count.
pub fn encode_clouds(clouds: &[PointCloud]) -> Result<Vec<u8>> {
    let n = clouds.first().map_or(0, PointCloud::len);
    if clouds.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch("clouds differ in point count".into()));
    }
    let values = clouds
        .iter()
        .flat_map(|c| c.points.iter().flat_map(|p| p.iter().map(|&v| v as f32)));
    Ok(encode(b"BPCL", clouds.len(), n * 3, values))
}

pub fn write_clouds(path: &Path, clouds: &[PointCloud]) -> Result<()> {
    write_atomic(path, &encode_clouds(clouds)?)?;
    let ids: Vec<String> = clouds.iter().map(|c| c.source_id.clone()).collect();
    write_ids(path, &ids)
}

pub fn read_clouds(path: &Path) -> Result<Vec<PointCloud>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (rows, width, values) = decode(b"BPCL", &bytes)?;
    if width % 3 != 0 {
        return Err(Error::Format(format!("row width {width} is not a multiple of 3")));
    }
    let ids = read_ids(path, rows)?;
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(r, id)| {
            let row = &values[r * width..(r + 1) * width];
            let points = row
                .chunks_exact(3)
                .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
                .collect();
            PointCloud::new(id, points)
        })
        .collect())
}

/// Codewords keyed by building id.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub ids: Vec<String>,
    pub dim: usize,
    /// Row-major `ids.len() × dim`.
    pub values: Vec<f32>,
}

impl Embeddings {
    pub fn new(ids: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != ids.len() * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} rows of width {dim}",
                values.len(),
                ids.len()
            )));
        }
        Ok(Embeddings { ids, dim, values })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| self.row(i).iter().map(|&v| v as f64).collect())
            .collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        encode(b"BEMB", self.len(), self.dim, self.values.iter().copied())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())?;
        write_ids(path, &self.ids)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (rows, dim, values) = decode(b"BEMB", &bytes)?;
        Embeddings::new(read_ids(path, rows)?, dim, values)
    }
}

/// One JSON-serialized building per line.
pub fn write_buildings(path: &Path, records: &[BuildingRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

pub fn read_buildings(path: &Path) -> Result<Vec<BuildingRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cloud_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bpcl");
        let clouds = vec![
            PointCloud::new("a".into(), vec![[0.5, -1.0, 0.25], [1.0, 2.0, 3.0]]),
            PointCloud::new("b".into(), vec![[0.0, 0.0, 0.0], [-0.125, 8.0, 1e-3]]),
        ];
        write_clouds(&path, &clouds).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"BPCL");
        assert_eq!(bytes.len(), 16 + 2 * 2 * 3 * 4);
        let back = read_clouds(&path).unwrap();
        assert_eq!(back[0], clouds[0]);
        assert_eq!(back[1].source_id, "b");
        assert_eq!(back[1].points[1][2], 1e-3f32 as f64);
    }

    #[test]
    fn embedding_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bemb");
        let e = Embeddings::new(vec!["x".into(), "y".into()], 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        e.write(&path).unwrap();
        assert_eq!(Embeddings::read(&path).unwrap(), e);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(Embeddings::read(&path), Err(Error::Format(_))));
        fs::write(&path, b"BPCL\x01\0\0\0\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(Embeddings::read(&path), Err(Error::Format(_))));
        assert!(Embeddings::new(vec!["x".into()], 2, vec![1.0]).is_err());
    }

    #[test]
    fn building_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.jsonl");
        let ds = crate::synth::generate_dataset(3, &["u-pent".parse().unwrap()], [0.0, 0.0, 50.0, 50.0], 1).unwrap();
        write_buildings(&path, &ds.records).unwrap();
        assert_eq!(read_buildings(&path).unwrap(), ds.records);
        fs::write(&path, "{").unwrap();
        assert!(matches!(read_buildings(&path), Err(Error::Format(_))));
    }
}
