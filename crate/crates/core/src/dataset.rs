//! Buildings to normalized point clouds: sample every surface, drop clouds
//! whose radius falls outside the percentile band, rescale by one shared
//! factor.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::citygml::BuildingRecord;
use crate::error::{Error, Result};
use crate::mesh::{
    centroid_radius, normalize_cloud, percentile_filter, surface_sample, NormalizationManifest, PointCloud,
};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub points: usize,
    pub seed: u64,
    pub percentile_lo: f64,
    pub percentile_hi: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            points: 2048,
            seed: 0,
            percentile_lo: 1.0,
            percentile_hi: 99.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PreparedClouds {
    /// Kept clouds, normalized, in input order.
    pub clouds: Vec<PointCloud>,
    pub manifest: NormalizationManifest,
    /// Ids removed by the percentile filter.
    pub dropped: Vec<String>,
}

/// Per-building sampling seed; depends on the id, not on dataset order.
pub fn building_seed(seed: u64, id: &str) -> u64 {
    rng::derive_seed(seed, &format!("sample/{id}"))
}

pub fn sample_buildings(records: &[BuildingRecord], points: usize, seed: u64) -> Result<Vec<PointCloud>> {
    records
        .par_iter()
        .map(|r| Ok(surface_sample(&r.mesh, points, building_seed(seed, &r.id))?.with_source(r.id.clone())))
        .collect()
}

pub fn prepare_clouds(records: &[BuildingRecord], config: &SampleConfig) -> Result<PreparedClouds> {
    let raw = sample_buildings(records, config.points, config.seed)?;
    normalize_all(raw, config.percentile_lo, config.percentile_hi)
}

/// Percentile filter on centroid radii, then shared-scale normalization.
pub fn normalize_all(raw: Vec<PointCloud>, lo_pct: f64, hi_pct: f64) -> Result<PreparedClouds> {
    let radii: Vec<f64> = raw
        .iter()
        .map(|c| centroid_radius(c).map(|(_, r)| r))
        .collect::<Result<_>>()?;
    let (keep, manifest) = percentile_filter(&radii, lo_pct, hi_pct)?;
    let mut clouds = Vec::with_capacity(manifest.kept_count);
    let mut dropped = Vec::new();
    for (cloud, k) in raw.into_iter().zip(keep) {
        if k {
            clouds.push(normalize_cloud(&cloud, &manifest)?);
        } else {
            dropped.push(cloud.source_id);
        }
    }
    Ok(PreparedClouds {
        clouds,
        manifest,
        dropped,
    })
}

/// Seeded shuffle of ids split `train:test` (e.g. 3:1). Both halves keep
/// the input order.
pub fn split_ids(ids: &[String], train: usize, test: usize, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if train + test == 0 {
        return Err(Error::InvalidArgument("split ratio 0:0".into()));
    }
    let mut idx: Vec<usize> = (0..ids.len()).collect();
    idx.shuffle(&mut rng::stream(seed, "split"));
    let n_train = (ids.len() * train + (train + test) / 2) / (train + test);
    let mut is_train = vec![false; ids.len()];
    for &i in &idx[..n_train] {
        is_train[i] = true;
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (id, t) in ids.iter().zip(is_train) {
        if t { a.push(id.clone()) } else { b.push(id.clone()) }
    }
    Ok((a, b))
}

pub fn parse_split(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("split {s:?} is not of the form A:B"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}
