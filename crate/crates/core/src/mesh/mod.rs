//! Triangle meshes and the operations that turn them into normalized point
//! clouds: watertightness validation, area-weighted surface sampling,
//! centroid/radius statistics, percentile filtering and normalization.

mod normalize;
mod sampling;
mod watertight;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec2, Vec3};

pub use normalize::{
    centroid_radius, normalize_cloud, percentile, percentile_filter, NormalizationManifest,
    PointCloud,
};
pub use sampling::{surface_sample, surface_sample_with_faces};
pub use watertight::{watertight_check, WatertightReport, WELD_TOLERANCE};

/// Triangles below this area (m²) are dropped by [`TriangleMesh::cleanup`].
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = TriangleMesh {
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(v) = self
            .vertices
            .iter()
            .position(|v| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::NonFinite(format!("mesh vertex {v}")));
        }
        if let Some(t) = self.triangles.iter().position(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidArgument(format!(
                "triangle {t} references a vertex beyond {n}"
            )));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_areas(&self) -> Vec<f64> {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                geom::triangle_area(a, b, c)
            })
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.triangle_areas().iter().sum()
    }

    /// Divergence-theorem volume; positive for a closed outward-oriented mesh.
    /// Computed about the first vertex to avoid cancellation far from the origin.
    pub fn signed_volume(&self) -> f64 {
        let Some(&o) = self.vertices.first() else {
            return 0.0;
        };
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t).map(|p| geom::sub(p, o));
                geom::dot(a, geom::cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Drops triangles with (near) zero area and vertices no triangle uses.
    /// Returns the number of triangles removed.
    pub fn cleanup(&mut self) -> usize {
        let before = self.triangles.len();
        let verts = &self.vertices;
        self.triangles.retain(|&[a, b, c]| {
            a != b
                && b != c
                && a != c
                && geom::triangle_area(verts[a], verts[b], verts[c]) > MIN_TRIANGLE_AREA
        });
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut kept = Vec::new();
        for t in &mut self.triangles {
            for i in t.iter_mut() {
                if remap[*i] == usize::MAX {
                    remap[*i] = kept.len();
                    kept.push(self.vertices[*i]);
                }
                *i = remap[*i];
            }
        }
        self.vertices = kept;
        before - self.triangles.len()
    }

    /// Approximate footprint centroid: area-weighted centroid of the xy
    /// projections of downward-facing triangles, or of all triangles when
    /// none face down.
    pub fn footprint_centroid(&self) -> Option<Vec2> {
        let accumulate = |downward_only: bool| {
            let mut area = 0.0;
            let mut cx = 0.0;
            let mut cy = 0.0;
            for t in 0..self.triangles.len() {
                let [a, b, c] = self.corners(t);
                let nz = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                if downward_only && nz >= 0.0 {
                    continue;
                }
                let w = 0.5 * nz.abs();
                area += w;
                cx += w * (a[0] + b[0] + c[0]) / 3.0;
                cy += w * (a[1] + b[1] + c[1]) / 3.0;
            }
            (area > 0.0).then(|| [cx / area, cy / area])
        };
        accumulate(true).or_else(|| accumulate(false))
    }

    pub fn max_z(&self) -> Option<f64> {
        self.vertices.iter().map(|v| v[2]).reduce(f64::max)
    }
}

/// Incrementally assembles a mesh, sharing vertices whose coordinates are
/// bitwise identical.
#[derive(Debug, Default)]
pub struct MeshBuilder {
    mesh: TriangleMesh,
    index: HashMap<[u64; 3], usize>,
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, p: Vec3) -> usize {
        // -0.0 and 0.0 are the same point.
        let key = p.map(|c| if c == 0.0 { 0u64 } else { c.to_bits() });
        let mesh = &mut self.mesh;
        *self.index.entry(key).or_insert_with(|| {
            mesh.vertices.push(p);
            mesh.vertices.len() - 1
        })
    }

    pub fn triangle(&mut self, a: Vec3, b: Vec3, c: Vec3) {
        let t = [self.vertex(a), self.vertex(b), self.vertex(c)];
        self.mesh.triangles.push(t);
    }

    pub fn triangle_count(&self) -> usize {
        self.mesh.triangles.len()
    }

    pub fn finish(self) -> TriangleMesh {
        self.mesh
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Unit cube [0,1]³ with outward-facing triangles.
    pub fn unit_cube() -> TriangleMesh {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.0, 1.0, 1.0],
        ];
        let t = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        TriangleMesh::new(v, t).unwrap()
    }
}
