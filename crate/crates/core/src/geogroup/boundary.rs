use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::group::{group_buildings, near_order, GeoEntity, GroupAssignment};
use super::median::{median_center, CenterMethod};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::store::Embeddings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Administrative,
    Tile,
}

/// Polygon rings (outer and holes alike; containment is even-odd).
pub type Rings = Vec<Vec<Vec2>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub boundary_id: String,
    pub kind: BoundaryKind,
    pub members: Vec<GeoEntity>,
    pub geometry: Option<Rings>,
}

/// Tiles of `size` meters anchored at the box minimum. Each entity lands in
/// tile (⌊(x−x₀)/s⌋, ⌊(y−y₀)/s⌋); empty tiles are omitted. Entities left of
/// or below the box are dropped with a warning.
pub fn make_tiles(bbox: [f64; 4], size: f64, entities: &[GeoEntity]) -> Result<Vec<Boundary>> {
    if !(size > 0.0) || !(bbox[2] >= bbox[0] && bbox[3] >= bbox[1]) {
        return Err(Error::InvalidArgument(format!("tile size {size} or box {bbox:?} is invalid")));
    }
    let mut tiles: BTreeMap<(u64, u64), Vec<GeoEntity>> = BTreeMap::new();
    for e in entities {
        let fx = ((e.location[0] - bbox[0]) / size).floor();
        let fy = ((e.location[1] - bbox[1]) / size).floor();
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            log::warn!("{} lies outside the tiling box", e.building_id);
            continue;
        }
        tiles.entry((fx as u64, fy as u64)).or_default().push(e.clone());
    }
    Ok(tiles
        .into_iter()
        .map(|((ix, iy), members)| {
            let (x0, y0) = (bbox[0] + ix as f64 * size, bbox[1] + iy as f64 * size);
            Boundary {
                boundary_id: format!("tile_{ix:05}_{iy:05}"),
                kind: BoundaryKind::Tile,
                members,
                geometry: Some(vec![vec![[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size]]]),
            }
        })
        .collect())
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let scale = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).max(1.0);
    cross.abs() <= 1e-9 * scale
        && p[0] >= a[0].min(b[0]) - 1e-9
        && p[0] <= a[0].max(b[0]) + 1e-9
        && p[1] >= a[1].min(b[1]) - 1e-9
        && p[1] <= a[1].max(b[1]) + 1e-9
}

/// Even-odd containment over all rings; points on an edge count as inside.
pub fn contains(rings: &Rings, p: Vec2) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            if on_segment(p, a, b) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Boundaries from an entity table's `boundary_id` column. Entities without
/// one are left out.
pub fn boundaries_from_column(entities: &[(GeoEntity, Option<String>)]) -> Vec<Boundary> {
    let mut by_id: BTreeMap<String, Vec<GeoEntity>> = BTreeMap::new();
    for (e, b) in entities {
        match b {
            Some(b) if !b.is_empty() => by_id.entry(b.clone()).or_default().push(e.clone()),
            _ => log::warn!("{} has no boundary id", e.building_id),
        }
    }
    by_id
        .into_iter()
        .map(|(boundary_id, members)| Boundary {
            boundary_id,
            kind: BoundaryKind::Administrative,
            members,
            geometry: None,
        })
        .collect()
}

/// Assigns each entity to the first polygon (in id order) containing it.
pub fn boundaries_from_polygons(polygons: &[(String, Rings)], entities: &[GeoEntity]) -> Vec<Boundary> {
    let mut order: Vec<usize> = (0..polygons.len()).collect();
    order.sort_by(|&a, &b| polygons[a].0.cmp(&polygons[b].0));
    let mut members: Vec<Vec<GeoEntity>> = vec![Vec::new(); polygons.len()];
    for e in entities {
        match order.iter().find(|&&i| contains(&polygons[i].1, e.location)) {
            Some(&i) => members[i].push(e.clone()),
            None => log::warn!("{} lies in no boundary polygon", e.building_id),
        }
    }
    order
        .into_iter()
        .filter_map(|i| {
            let m = std::mem::take(&mut members[i]);
            (!m.is_empty()).then_some((i, m))
        })
        .map(|(i, members)| Boundary {
            boundary_id: polygons[i].0.clone(),
            kind: BoundaryKind::Administrative,
            members,
            geometry: Some(polygons[i].1.clone()),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    pub boundary_id: String,
    pub anchor: Vec2,
    pub assignment: GroupAssignment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub boundary_id: String,
    pub count: usize,
    pub groups: usize,
    pub k_ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub results: Vec<BoundaryResult>,
    pub summary: Vec<SummaryRow>,
    /// Boundaries left out, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Resolves a boundary's member vectors, or names the first id missing
/// from the store.
fn resolve(b: &Boundary, store: &Embeddings, index: &HashMap<&str, usize>) -> std::result::Result<Vec<usize>, String> {
    b.members
        .iter()
        .map(|e| {
            index
                .get(e.building_id.as_str())
                .copied()
                .or_else(|| (e.embedding_row < store.len() && store.ids[e.embedding_row] == e.building_id).then_some(e.embedding_row))
                .ok_or_else(|| format!("no embedding for {}", e.building_id))
        })
        .collect()
}

/// Groups every boundary independently, in boundary-id order.
pub fn run_boundaries(boundaries: &[Boundary], store: &Embeddings, tau: f64, method: CenterMethod) -> Result<RunOutput> {
    let mut sorted: Vec<&Boundary> = boundaries.iter().filter(|b| !b.members.is_empty()).collect();
    sorted.sort_by(|a, b| a.boundary_id.cmp(&b.boundary_id));
    let index: HashMap<&str, usize> = store.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let per: Vec<Result<std::result::Result<BoundaryResult, String>>> = sorted
        .par_iter()
        .map(|b| {
            let rows = match resolve(b, store, &index) {
                Ok(r) => r,
                Err(why) => return Ok(Err(why)),
            };
            let locs: Vec<Vec2> = b.members.iter().map(|e| e.location).collect();
            let anchor = median_center(&locs, method)?;
            let order = near_order(&b.members, anchor);
            let ids: Vec<String> = order.iter().map(|&(i, _)| b.members[i].building_id.clone()).collect();
            let vectors: Vec<Vec<f64>> = order
                .iter()
                .map(|&(i, _)| store.row(rows[i]).iter().map(|&v| f64::from(v)).collect())
                .collect();
            Ok(Ok(BoundaryResult {
                boundary_id: b.boundary_id.clone(),
                anchor,
                assignment: group_buildings(&ids, &vectors, tau)?,
            }))
        })
        .collect();
    let mut out = RunOutput::default();
    for (b, r) in sorted.iter().zip(per) {
        match r? {
            Ok(res) => {
                out.summary.push(SummaryRow {
                    boundary_id: res.boundary_id.clone(),
                    count: res.assignment.members.len(),
                    groups: res.assignment.group_count(),
                    k_ratio: res.assignment.k_ratio,
                });
                out.results.push(res);
            }
            Err(why) => {
                log::warn!("skipping boundary {}: {why}", b.boundary_id);
                out.skipped.push((b.boundary_id.clone(), why));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub boundary_id: String,
    pub tau: f64,
    pub count: usize,
    pub groups: usize,
    pub k_ratio: f64,
}

/// One summary row per (boundary, tau).
pub fn sweep(boundaries: &[Boundary], store: &Embeddings, taus: &[f64], method: CenterMethod) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &tau in taus {
        for s in run_boundaries(boundaries, store, tau, method)?.summary {
            rows.push(SweepRow {
                boundary_id: s.boundary_id,
                tau,
                count: s.count,
                groups: s.groups,
                k_ratio: s.k_ratio,
            });
        }
    }
    rows.sort_by(|a, b| a.boundary_id.cmp(&b.boundary_id).then(a.tau.total_cmp(&b.tau)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ent(id: &str, x: f64, y: f64, row: usize) -> GeoEntity {
        GeoEntity { building_id: id.into(), location: [x, y], embedding_row: row }
    }

    #[test]
    fn tiles_are_half_open() {
        let es = vec![ent("a", 500.0, 500.0, 0), ent("b", 1500.0, 500.0, 1), ent("c", 500.0, 1500.0, 2), ent("d", 1500.0, 1500.0, 3)];
        let t = make_tiles([0.0, 0.0, 2000.0, 2000.0], 1000.0, &es).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|b| b.members.len() == 1));
        let edge = make_tiles([0.0, 0.0, 2000.0, 2000.0], 1000.0, &[ent("e", 1000.0, 999.0, 0)]).unwrap();
        assert_eq!(edge[0].boundary_id, "tile_00001_00000");
        let small = make_tiles([0.0, 0.0, 10.0, 10.0], 1000.0, &[ent("a", 1.0, 1.0, 0), ent("b", 9.0, 9.0, 1)]).unwrap();
        assert_eq!(small.len(), 1);
    }

    #[test]
    fn even_odd_with_hole_and_edges() {
        let rings = vec![
            vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]],
            vec![[4.0, 4.0], [6.0, 4.0], [6.0, 6.0], [4.0, 6.0]],
        ];
        assert!(contains(&rings, [1.0, 1.0]));
        assert!(!contains(&rings, [5.0, 5.0]));
        assert!(contains(&rings, [10.0, 5.0]));
        assert!(contains(&rings, [4.0, 5.0]));
        assert!(contains(&rings, [0.0, 0.0]));
        assert!(!contains(&rings, [11.0, 5.0]));
    }

    #[test]
    fn missing_embedding_skips_only_that_boundary() {
        let store = Embeddings::new(vec!["a".into(), "b".into()], 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let bs = vec![
            Boundary { boundary_id: "x".into(), kind: BoundaryKind::Administrative, members: vec![ent("a", 0.0, 0.0, 0), ent("b", 1.0, 0.0, 1)], geometry: None },
            Boundary { boundary_id: "y".into(), kind: BoundaryKind::Administrative, members: vec![ent("zz", 0.0, 0.0, 7)], geometry: None },
            Boundary { boundary_id: "w".into(), kind: BoundaryKind::Administrative, members: vec![ent("b", 0.0, 0.0, 1)], geometry: None },
        ];
        let out = run_boundaries(&bs, &store, 0.03, CenterMethod::Geometric).unwrap();
        assert_eq!(out.summary.iter().map(|s| s.boundary_id.as_str()).collect::<Vec<_>>(), vec!["w", "x"]);
        assert_eq!((out.summary[0].groups, out.summary[0].k_ratio), (1, 1.0));
        assert_eq!((out.summary[1].count, out.summary[1].groups), (2, 2));
        assert_eq!(out.skipped.len(), 1);
        let again = run_boundaries(&bs, &store, 0.03, CenterMethod::Geometric).unwrap();
        assert_eq!(again, out);
    }
}
