use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One merge: clusters `a < b` joined at `distance` into a cluster of `size`
/// leaves. The merged cluster gets id `leaves + row index`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

/// Ordering key of a candidate pair: distance, then smaller id, then larger id.
type Key = (f64, usize, usize);

fn less(x: Key, y: Key) -> bool {
    x.0 < y.0 || (x.0 == y.0 && (x.1, x.2) < (y.1, y.2))
}

/// Ward agglomerative clustering. Distances follow the Lance–Williams
/// update, starting from Euclidean distances between singletons; among
/// equal distances the pair with the smallest (a, b) ids merges first.
pub fn ward_linkage(points: &[Vec<f64>]) -> Result<Dendrogram> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "linkage needs at least 2 points, got {n}"
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch("rows differ in width".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linkage input".into()));
    }
    // squared distances between slots; slot i starts as leaf i
    let mut d2 = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d2[i * n + j] = s;
            d2[j * n + i] = s;
        }
    }
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let key = |d2: &[f64], id: &[usize], i: usize, j: usize| -> Key {
        (d2[i * n + j], id[i].min(id[j]), id[i].max(id[j]))
    };
    let nearest = |d2: &[f64], id: &[usize], active: &[bool], i: usize| -> Option<(usize, Key)> {
        let mut best: Option<(usize, Key)> = None;
        for j in 0..n {
            if j != i && active[j] {
                let k = key(d2, id, i, j);
                if best.is_none_or(|(_, bk)| less(k, bk)) {
                    best = Some((j, k));
                }
            }
        }
        best
    };
    let mut nn: Vec<Option<(usize, Key)>> = (0..n).map(|i| nearest(&d2, &id, &active, i)).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let (i, (j, k)) = (0..n)
            .filter(|&i| active[i])
            .filter_map(|i| nn[i].map(|x| (i, x)))
            .reduce(|a, b| if less(b.1 .1, a.1 .1) { b } else { a })
            .expect("at least two active clusters");
        let (keep, gone) = (i.min(j), i.max(j));
        let (ni, nj) = (size[keep] as f64, size[gone] as f64);
        let dij = d2[keep * n + gone];
        for m in 0..n {
            if !active[m] || m == keep || m == gone {
                continue;
            }
            let nm = size[m] as f64;
            let v = ((nm + ni) * d2[m * n + keep] + (nm + nj) * d2[m * n + gone] - nm * dij) / (nm + ni + nj);
            let v = v.max(0.0);
            d2[m * n + keep] = v;
            d2[keep * n + m] = v;
        }
        merges.push(Merge {
            a: k.1,
            b: k.2,
            distance: k.0.sqrt(),
            size: size[keep] + size[gone],
        });
        active[gone] = false;
        size[keep] += size[gone];
        id[keep] = n + step;
        nn[gone] = None;
        nn[keep] = nearest(&d2, &id, &active, keep);
        for m in 0..n {
            if !active[m] || m == keep {
                continue;
            }
            match nn[m] {
                Some((t, _)) if t == keep || t == gone => nn[m] = nearest(&d2, &id, &active, m),
                Some((_, cur)) => {
                    let cand = key(&d2, &id, m, keep);
                    if less(cand, cur) {
                        nn[m] = Some((keep, cand));
                    }
                }
                None => nn[m] = nearest(&d2, &id, &active, m),
            }
        }
    }
    Ok(Dendrogram { leaves: n, merges })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }
}

impl Dendrogram {
    /// Labels after applying the first `merges` rows, numbered densely by
    /// smallest member leaf.
    fn labels_after(&self, merges: usize) -> Vec<usize> {
        let n = self.leaves;
        let mut uf = UnionFind((0..2 * n).collect());
        for (r, m) in self.merges.iter().take(merges).enumerate() {
            let new = n + r;
            let (ra, rb) = (uf.find(m.a), uf.find(m.b));
            uf.0[ra] = new;
            uf.0[rb] = new;
        }
        let mut label_of_root = std::collections::HashMap::new();
        (0..n)
            .map(|leaf| {
                let root = uf.find(leaf);
                let next = label_of_root.len();
                *label_of_root.entry(root).or_insert(next)
            })
            .collect()
    }

    /// Clusters left after discarding merges above `d`.
    pub fn cut(&self, d: f64) -> Vec<usize> {
        let applied = self.merges.iter().take_while(|m| m.distance <= d).count();
        self.labels_after(applied)
    }

    /// Exactly `k` clusters (clamped to 1..=leaves).
    pub fn cut_to_clusters(&self, k: usize) -> Vec<usize> {
        let k = k.clamp(1, self.leaves);
        self.labels_after(self.leaves - k)
    }

    /// Cluster count as a function of the cutoff: one `(distance, clusters)`
    /// step per merge.
    pub fn cluster_curve(&self) -> Vec<(f64, usize)> {
        self.merges
            .iter()
            .enumerate()
            .map(|(r, m)| (m.distance, self.leaves - r - 1))
            .collect()
    }

    /// `cluster_a,cluster_b,distance,size`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cluster_a", "cluster_b", "distance", "size"])?;
        for m in &self.merges {
            w.write_record([m.a.to_string(), m.b.to_string(), format!("{:?}", m.distance), m.size.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("linkage", e))?;
        Ok(())
    }
}

pub fn cut_dendrogram(dendrogram: &Dendrogram, d: f64) -> Result<Vec<usize>> {
    if !(d >= 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff {d} must be >= 0")));
    }
    Ok(dendrogram.cut(d))
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Recomputes every cluster pair's Ward distance from member centroids
    /// at every step: d = sqrt(2·na·nb/(na+nb))·‖ca − cb‖.
    pub fn naive_ward(points: &[Vec<f64>]) -> Vec<Merge> {
        let n = points.len();
        let dim = points[0].len();
        let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
        let mut out = Vec::new();
        let centroid = |m: &[usize]| -> Vec<f64> {
            (0..dim).map(|k| m.iter().map(|&i| points[i][k]).sum::<f64>() / m.len() as f64).collect()
        };
        for step in 0..n - 1 {
            let mut best: Option<(f64, usize, usize, usize, usize)> = None;
            for x in 0..clusters.len() {
                for y in x + 1..clusters.len() {
                    let (ia, ma) = &clusters[x];
                    let (ib, mb) = &clusters[y];
                    let (ca, cb) = (centroid(ma), centroid(mb));
                    let (na, nb) = (ma.len() as f64, mb.len() as f64);
                    let dist = (2.0 * na * nb / (na + nb)).sqrt()
                        * ca.iter().zip(&cb).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                    let (lo, hi) = ((*ia).min(*ib), (*ia).max(*ib));
                    let better = match best {
                        None => true,
                        Some((bd, bl, bh, _, _)) => {
                            // equal within rounding counts as a tie
                            if (dist - bd).abs() <= 1e-12 * bd.max(1.0) {
                                (lo, hi) < (bl, bh)
                            } else {
                                dist < bd
                            }
                        }
                    };
                    if better {
                        best = Some((dist, lo, hi, x, y));
                    }
                }
            }
            let (dist, lo, hi, x, y) = best.unwrap();
            let mut members = clusters[x].1.clone();
            members.extend(&clusters[y].1);
            clusters.remove(y);
            clusters.remove(x);
            out.push(Merge { a: lo, b: hi, distance: dist, size: members.len() });
            clusters.push((n + step, members));
        }
        out
    }
}
