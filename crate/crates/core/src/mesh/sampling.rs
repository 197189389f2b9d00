use rand::RngExt;

use super::{PointCloud, TriangleMesh};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::rng;

/// Draws `count` points uniformly over the mesh surface: a triangle is picked
/// with probability proportional to its area, then a uniform barycentric
/// point inside it.
pub fn surface_sample(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<PointCloud> {
    surface_sample_with_faces(mesh, count, seed).map(|(cloud, _)| cloud)
}

/// Like [`surface_sample`], also returning the source triangle of each point.
pub fn surface_sample_with_faces(
    mesh: &TriangleMesh,
    count: usize,
    seed: u64,
) -> Result<(PointCloud, Vec<usize>)> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for area in mesh.triangle_areas() {
        total += area;
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }

    let mut rng = rng::stream(seed, "surface-sample");
    let mut points = Vec::with_capacity(count);
    let mut faces = Vec::with_capacity(count);
    let last = cumulative.len() - 1;
    for _ in 0..count {
        let u = rng.random::<f64>() * total;
        let t = cumulative.partition_point(|&c| c <= u).min(last);
        let [a, b, c] = mesh.corners(t);
        let (mut r1, mut r2) = (rng.random::<f64>(), rng.random::<f64>());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        let p: Vec3 = geom::add(
            a,
            geom::add(geom::scale(geom::sub(b, a), r1), geom::scale(geom::sub(c, a), r2)),
        );
        points.push(p);
        faces.push(t);
    }
    Ok((PointCloud::new(String::new(), points), faces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::unit_cube;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn point_triangle_distance(p: Vec3, [a, b, c]: [Vec3; 3]) -> f64 {
        // distance to the plane plus an inside test via barycentric signs
        let n = geom::cross(geom::sub(b, a), geom::sub(c, a));
        let nn = geom::norm(n);
        let plane = geom::dot(geom::sub(p, a), n).abs() / nn;
        let inside = [(a, b), (b, c), (c, a)].iter().all(|&(u, v)| {
            geom::dot(geom::cross(geom::sub(v, u), geom::sub(p, u)), n) >= -1e-12
        });
        if inside {
            plane
        } else {
            f64::INFINITY
        }
    }

    #[test]
    fn single_triangle_samples_lie_inside() {
        let tri = TriangleMesh::new(
            vec![[0.0, 0.0, 2.0], [3.0, 0.5, 2.5], [1.0, 2.0, 1.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let cloud = surface_sample(&tri, 5, 11).unwrap();
        assert_eq!(cloud.points.len(), 5);
        for p in &cloud.points {
            assert!(point_triangle_distance(*p, tri.corners(0)) < 1e-9);
        }
    }

    #[test]
    fn every_sample_on_its_source_triangle() {
        let cube = unit_cube();
        let (cloud, faces) = surface_sample_with_faces(&cube, 2000, 5).unwrap();
        for (p, &f) in cloud.points.iter().zip(&faces) {
            assert!(point_triangle_distance(*p, cube.corners(f)) < 1e-9);
        }
    }

    #[test]
    fn cube_face_counts_within_three_sigma() {
        let cube = unit_cube();
        let (_, faces) = surface_sample_with_faces(&cube, 60_000, 3).unwrap();
        let mut per_face = [0usize; 6];
        for f in faces {
            per_face[f / 2] += 1;
        }
        let sigma = (60_000.0_f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        assert!((sigma - 91.287).abs() < 1e-3);
        for c in per_face {
            assert!((c as f64 - 10_000.0).abs() <= 3.0 * sigma, "{per_face:?}");
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cube = unit_cube();
        let a = surface_sample(&cube, 100, 9).unwrap();
        let b = surface_sample(&cube, 100, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, surface_sample(&cube, 100, 10).unwrap());
    }

    #[test]
    fn triangle_order_does_not_bias_distribution() {
        let mut cube = unit_cube();
        cube.triangles.reverse();
        cube.triangles.rotate_left(5);
        let areas = cube.triangle_areas();
        let total: f64 = areas.iter().sum();
        let n = 60_000;
        let (_, faces) = surface_sample_with_faces(&cube, n, 21).unwrap();
        let mut hits = vec![0usize; areas.len()];
        for f in faces {
            hits[f] += 1;
        }
        let chi2: f64 = hits
            .iter()
            .zip(&areas)
            .map(|(&h, &a)| {
                let e = n as f64 * a / total;
                (h as f64 - e).powi(2) / e
            })
            .sum();
        let p = 1.0 - ChiSquared::new((areas.len() - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.001, "chi2 {chi2} p {p}");
    }

    #[test]
    fn zero_area_mesh_is_an_error() {
        let flat = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(surface_sample(&flat, 3, 0), Err(Error::ZeroArea)));
        assert!(surface_sample(&unit_cube(), 0, 0).is_err());
    }
}
