//! Codeword analysis: PCA, Ward clustering, cluster sampling and t-SNE.

mod pca;
mod tsne;
mod ward;

use std::io::Write;

use rand::seq::IndexedRandom;

pub use pca::{pca_fit, pca_transform, PcaModel};
pub use tsne::{joint_affinities, kl_divergence, tsne, TsneConfig, TsneResult};
pub use ward::{cut_dendrogram, ward_linkage, Dendrogram, Merge};

use crate::error::{Error, Result};
use crate::rng;

/// Up to `m` distinct members of `cluster`, chosen with a seeded draw and
/// returned in ascending index order.
pub fn sample_cluster(labels: &[usize], cluster: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == cluster).collect();
    if members.is_empty() {
        return Err(Error::UnknownCluster(cluster));
    }
    let mut r = rng::indexed_stream(seed, "cluster-sample", cluster as u64);
    let mut picked: Vec<usize> = members.sample(&mut r, m.min(members.len())).copied().collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Fraction of items whose cluster's majority class matches their own.
pub fn purity(labels: &[usize], classes: &[usize]) -> f64 {
    use std::collections::HashMap;
    let mut counts: HashMap<usize, HashMap<usize, usize>> = HashMap::new();
    for (&l, &c) in labels.iter().zip(classes) {
        *counts.entry(l).or_default().entry(c).or_default() += 1;
    }
    let hit: usize = counts.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    hit as f64 / labels.len().max(1) as f64
}

/// `building_id,cluster`
pub fn write_labels_csv<W: Write>(out: W, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["building_id", "cluster"])?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("labels", e))?;
    Ok(())
}

/// `building_id,x,y`
pub fn write_coords_csv<W: Write>(out: W, ids: &[String], coords: &[[f64; 2]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["building_id", "x", "y"])?;
    for (id, c) in ids.iter().zip(coords) {
        w.write_record([id.clone(), format!("{:?}", c[0]), format!("{:?}", c[1])])?;
    }
    w.flush().map_err(|e| Error::io("coordinates", e))?;
    Ok(())
}
