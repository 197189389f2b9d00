use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::TriangleMesh;
use crate::geom;

/// Vertices closer than this (meters) are the same vertex for topology.
pub const WELD_TOLERANCE: f64 = 1e-6;

/// Edge-incidence analysis of a mesh. Edges are named by the (welded)
/// vertex indices of their endpoints, smaller index first.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct WatertightReport {
    pub is_watertight: bool,
    /// Edges used by exactly one triangle.
    pub boundary_edges: Vec<[usize; 2]>,
    /// Edges used by three or more triangles.
    pub non_manifold_edges: Vec<[usize; 2]>,
    /// Edges shared by two triangles that traverse it in the same direction.
    pub inconsistent_edges: Vec<[usize; 2]>,
    /// Triangles that collapse to a segment or point after welding.
    pub collapsed_triangles: Vec<usize>,
}

pub fn watertight_check(mesh: &TriangleMesh) -> WatertightReport {
    let rep = weld(&mesh.vertices, WELD_TOLERANCE);

    // undirected edge -> directions of each incident use (true = low->high)
    let mut edges: BTreeMap<[usize; 2], Vec<bool>> = BTreeMap::new();
    let mut collapsed_triangles = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let w = tri.map(|i| rep[i]);
        if w[0] == w[1] || w[1] == w[2] || w[0] == w[2] {
            collapsed_triangles.push(t);
            continue;
        }
        for k in 0..3 {
            let (a, b) = (w[k], w[(k + 1) % 3]);
            edges.entry([a.min(b), a.max(b)]).or_default().push(a < b);
        }
    }

    let mut report = WatertightReport {
        collapsed_triangles,
        ..Default::default()
    };
    for (edge, uses) in edges {
        match uses.len() {
            1 => report.boundary_edges.push(edge),
            2 if uses[0] == uses[1] => report.inconsistent_edges.push(edge),
            2 => {}
            _ => report.non_manifold_edges.push(edge),
        }
    }
    report.is_watertight = !mesh.triangles.is_empty()
        && report.boundary_edges.is_empty()
        && report.non_manifold_edges.is_empty()
        && report.inconsistent_edges.is_empty()
        && report.collapsed_triangles.is_empty();
    report
}

/// Maps every vertex to the first earlier vertex within `tol`, or itself.
fn weld(vertices: &[geom::Vec3], tol: f64) -> Vec<usize> {
    let cell = |v: geom::Vec3| v.map(|c| (c / tol).floor() as i64);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut rep = Vec::with_capacity(vertices.len());
    for (i, &v) in vertices.iter().enumerate() {
        let [cx, cy, cz] = cell(v);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&[cx + dx, cy + dy, cz + dz]) {
                        for &j in list {
                            if geom::dist(v, vertices[j]) <= tol
                                && found.is_none_or(|f: usize| j < f)
                            {
                                found = Some(j);
                                continue 'search;
                            }
                        }
                    }
                }
            }
        }
        match found {
            Some(j) => rep.push(j),
            None => {
                grid.entry([cx, cy, cz]).or_default().push(i);
                rep.push(i);
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::unit_cube;

    #[test]
    fn closed_cube_is_watertight() {
        let r = watertight_check(&unit_cube());
        assert!(r.is_watertight, "{r:?}");
    }

    #[test]
    fn missing_triangle_leaves_three_boundary_edges() {
        let mut cube = unit_cube();
        cube.triangles.remove(3);
        let r = watertight_check(&cube);
        assert!(!r.is_watertight);
        assert_eq!(r.boundary_edges.len(), 3);
        assert!(r.inconsistent_edges.is_empty());
    }

    /// Brute-force count of edges whose two uses run the same direction.
    fn brute_inconsistent(mesh: &TriangleMesh) -> usize {
        let mut directed = Vec::new();
        for t in &mesh.triangles {
            for k in 0..3 {
                directed.push((t[k], t[(k + 1) % 3]));
            }
        }
        let mut count = 0;
        for (i, a) in directed.iter().enumerate() {
            for b in &directed[i + 1..] {
                if a == b {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn flipped_triangle_gives_three_inconsistent_edges() {
        let mut cube = unit_cube();
        cube.triangles[5].swap(1, 2);
        assert_eq!(brute_inconsistent(&cube), 3);
        let r = watertight_check(&cube);
        assert!(!r.is_watertight);
        assert_eq!(r.inconsistent_edges.len(), 3);
        assert!(r.boundary_edges.is_empty());
    }

    #[test]
    fn near_duplicate_vertices_are_welded() {
        let mut cube = unit_cube();
        // Split vertex 6 into a copy with sub-tolerance noise for two triangles.
        cube.vertices.push([1.0 + 3e-7, 1.0, 1.0 - 2e-7]);
        let copy = cube.vertices.len() - 1;
        for t in cube.triangles.iter_mut().take(4).skip(2) {
            for i in t.iter_mut() {
                if *i == 6 {
                    *i = copy;
                }
            }
        }
        assert!(watertight_check(&cube).is_watertight);
    }

    #[test]
    fn doubled_face_is_non_manifold() {
        let mut cube = unit_cube();
        cube.triangles.push([0, 2, 1]);
        cube.triangles.push([0, 1, 2]);
        let r = watertight_check(&cube);
        assert!(!r.non_manifold_edges.is_empty());
    }
}
