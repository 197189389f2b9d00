use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

pub const DEFAULT_TAU: f64 = 0.03;
pub const DEFAULT_SWEEP: [f64; 5] = [0.01, 0.02, 0.03, 0.04, 0.05];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoEntity {
    pub building_id: String,
    pub location: Vec2,
    /// Row in the embedding store.
    pub embedding_row: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub tau: f64,
    pub sweep: Vec<f64>,
}

impl Default for GroupConfig {
    fn default() -> Self {
        GroupConfig {
            tau: DEFAULT_TAU,
            sweep: DEFAULT_SWEEP.to_vec(),
        }
    }
}

pub fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tau {tau} must be in (0, 2]")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    /// Member ids in nearness order.
    pub members: Vec<String>,
    /// Group number (1-based) of each member, aligned with `members`.
    pub groups: Vec<usize>,
    /// Seed id of each group; group `g` is seeded by `seeds[g - 1]`.
    pub seeds: Vec<String>,
    pub k_ratio: f64,
}

impl GroupAssignment {
    pub fn group_count(&self) -> usize {
        self.seeds.len()
    }
}

pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", u.len(), v.len())));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector("cosine distance of a zero vector".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}

/// Members sorted by distance to `anchor`, ties by id. Returns indices into
/// `members` with their distances in meters.
pub fn near_order(members: &[GeoEntity], anchor: Vec2) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = members
        .iter()
        .enumerate()
        .map(|(i, e)| (i, (e.location[0] - anchor[0]).hypot(e.location[1] - anchor[1])))
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| members[a.0].building_id.cmp(&members[b.0].building_id)));
    order
}

/// Walks `ids` in the given (nearness) order: the first unassigned member
/// seeds a new group, which claims every unassigned member within `tau`
/// cosine distance of the seed. Claimed members stay locked.
pub fn group_buildings(ids: &[String], vectors: &[Vec<f64>], tau: f64) -> Result<GroupAssignment> {
    check_tau(tau)?;
    if ids.len() != vectors.len() {
        return Err(Error::DimensionMismatch(format!("{} ids, {} vectors", ids.len(), vectors.len())));
    }
    if let Some(i) = vectors.iter().position(|v| v.iter().all(|&x| x == 0.0)) {
        return Err(Error::ZeroVector(format!("embedding of {}", ids[i])));
    }
    let n = ids.len();
    let mut groups = vec![0usize; n];
    let mut seeds = Vec::new();
    for s in 0..n {
        if groups[s] != 0 {
            continue;
        }
        seeds.push(ids[s].clone());
        let g = seeds.len();
        groups[s] = g;
        for j in s + 1..n {
            if groups[j] == 0 && cosine_distance(&vectors[s], &vectors[j])? <= tau {
                groups[j] = g;
            }
        }
    }
    let k_ratio = if seeds.is_empty() { 0.0 } else { n as f64 / seeds.len() as f64 };
    Ok(GroupAssignment {
        members: ids.to_vec(),
        groups,
        seeds,
        k_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::RngExt;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("b{i:03}")).collect()
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine_distance(&[2.0, 3.0], &[2.0, 3.0]).unwrap(), 0.0);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let d = cosine_distance(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((d - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-15);
        assert!((d - 0.29289).abs() < 1e-5);
        assert!(matches!(cosine_distance(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::ZeroVector(_))));
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn four_member_trace() {
        let v = vec![vec![1.0, 0.0], vec![1.0, 0.01], vec![0.0, 1.0], vec![0.01, 1.0]];
        let a = group_buildings(&ids(4), &v, 0.03).unwrap();
        assert_eq!(a.groups, vec![1, 1, 2, 2]);
        assert_eq!(a.seeds, vec!["b000", "b002"]);
        assert_eq!(a.k_ratio, 2.0);
    }

    #[test]
    fn extremes() {
        let same = vec![vec![0.3, 0.4]; 7];
        let a = group_buildings(&ids(7), &same, 0.03).unwrap();
        assert_eq!((a.group_count(), a.k_ratio), (1, 7.0));
        let axes: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| f64::from(i == j)).collect()).collect();
        let b = group_buildings(&ids(5), &axes, 0.5).unwrap();
        assert_eq!((b.group_count(), b.k_ratio), (5, 1.0));
        assert!(group_buildings(&ids(2), &[vec![1.0], vec![0.0]], 0.03).is_err());
        assert!(group_buildings(&ids(1), &[vec![1.0]], 0.0).is_err());
    }

    #[test]
    fn nearness_ties_by_id() {
        let e = |id: &str, x: f64, y: f64| GeoEntity { building_id: id.into(), location: [x, y], embedding_row: 0 };
        let m = vec![e("c", 1.0, 0.0), e("a", 0.0, 1.0), e("z", 0.0, 0.0), e("b", 5.0, 0.0)];
        let o = near_order(&m, [0.0, 0.0]);
        let ids: Vec<&str> = o.iter().map(|&(i, _)| m[i].building_id.as_str()).collect();
        assert_eq!(ids, vec!["z", "a", "c", "b"]);
        assert_eq!(o[0].1, 0.0);
    }

    /// A larger tau lets A lock B away from C and D, which then split.
    #[test]
    fn group_count_can_grow_with_tau() {
        let (p, c) = (0.26f64, 0.2f64);
        let v = vec![
            vec![p.cos(), 0.0, p.sin()],
            vec![1.0, 0.0, 0.0],
            vec![c.cos(), c.sin(), 0.0],
            vec![c.cos(), -c.sin(), 0.0],
        ];
        assert_eq!(group_buildings(&ids(4), &v, 0.03).unwrap().group_count(), 2);
        assert_eq!(group_buildings(&ids(4), &v, 0.04).unwrap().group_count(), 3);
    }

    proptest! {
        #[test]
        fn partition_and_seed_properties(n in 1usize..120, dim in 2usize..6, seed in any::<u64>()) {
            let mut r = rng::stream(seed, "group-prop");
            // few directions plus noise so groups of several members appear
            let centers: Vec<Vec<f64>> = (0..4).map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
            let vecs: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let c = &centers[r.random_range(0..4)];
                    c.iter().map(|x| x + r.random_range(-0.1..0.1)).collect()
                })
                .collect();
            for tau in DEFAULT_SWEEP {
                let a = group_buildings(&ids(n), &vecs, tau).unwrap();
                let g = a.group_count();
                prop_assert!(a.groups.iter().all(|&x| x >= 1 && x <= g));
                for x in 1..=g {
                    prop_assert!(a.groups.contains(&x));
                }
                let seed_idx: Vec<usize> = a.seeds.iter().map(|s| a.members.iter().position(|m| m == s).unwrap()).collect();
                for (gi, &si) in seed_idx.iter().enumerate() {
                    prop_assert_eq!(a.groups[si], gi + 1);
                    for &sj in &seed_idx[gi + 1..] {
                        prop_assert!(cosine_distance(&vecs[si], &vecs[sj]).unwrap() > tau);
                    }
                }
                for (i, &gi) in a.groups.iter().enumerate() {
                    prop_assert!(cosine_distance(&vecs[seed_idx[gi - 1]], &vecs[i]).unwrap() <= tau);
                }
                prop_assert_eq!(a.k_ratio, n as f64 / g as f64);
                prop_assert!(a.k_ratio >= 1.0 && a.k_ratio <= n as f64);
            }
        }
    }
}
