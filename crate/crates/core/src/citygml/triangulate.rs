//! Polygon triangulation by ear clipping.
//!
//! Rings are projected onto their best-fit plane (least squares, oriented by
//! the Newell normal so winding is preserved), interior rings are bridged
//! into the exterior ring, and the resulting simple polygon is ear-clipped.
//! Output triangles reuse the original 3D vertices.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec2, Vec3};

/// Ring vertices farther than this (meters) from the best-fit plane make the
/// surface non-planar.
pub const PLANE_TOLERANCE: f64 = 1e-3;

/// A planar polygon with optional holes. Rings are stored open (the closing
/// vertex is not repeated).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonSurface {
    pub exterior_ring: Vec<Vec3>,
    pub interior_rings: Vec<Vec<Vec3>>,
}

impl PolygonSurface {
    /// Builds a surface from rings that may or may not repeat their first
    /// vertex at the end.
    pub fn new(exterior: Vec<Vec3>, interiors: Vec<Vec<Vec3>>) -> Self {
        PolygonSurface {
            exterior_ring: open_ring(exterior),
            interior_rings: interiors.into_iter().map(open_ring).collect(),
        }
    }

    /// Area of the exterior minus the holes, measured in the best-fit plane.
    pub fn area(&self) -> f64 {
        let n = geom::newell_normal(&self.exterior_ring);
        let len = geom::norm(n);
        if len == 0.0 {
            return 0.0;
        }
        let unit = geom::scale(n, 1.0 / len);
        let ring_area = |r: &[Vec3]| geom::dot(geom::newell_normal(r), unit).abs() * 0.5;
        ring_area(&self.exterior_ring)
            - self
                .interior_rings
                .iter()
                .map(|r| ring_area(r))
                .sum::<f64>()
    }
}

fn open_ring(mut ring: Vec<Vec3>) -> Vec<Vec3> {
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

/// Triangles as index triples into `vertices`, which lists the exterior ring
/// followed by each interior ring.
#[derive(Clone, Debug, PartialEq)]
pub struct Triangulation {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    /// Largest distance of a ring vertex from the best-fit plane.
    pub plane_deviation: f64,
}

impl Triangulation {
    pub fn is_planar(&self) -> bool {
        self.plane_deviation <= PLANE_TOLERANCE
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| geom::triangle_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]))
            .sum()
    }
}

pub fn triangulate_polygon(surface: &PolygonSurface) -> Result<Triangulation> {
    let degenerate = |ring: &str, reason: &str| Error::DegenerateRing {
        ring: ring.to_string(),
        reason: reason.to_string(),
    };

    let exterior = open_ring(surface.exterior_ring.clone());
    if distinct_count(&exterior) < 3 {
        return Err(degenerate("exterior", "fewer than 3 distinct vertices"));
    }
    let mut rings = vec![exterior];
    for (h, ring) in surface.interior_rings.iter().enumerate() {
        let ring = open_ring(ring.clone());
        if distinct_count(&ring) < 3 {
            return Err(degenerate(&format!("interior {h}"), "fewer than 3 distinct vertices"));
        }
        rings.push(ring);
    }

    let origin = rings[0][0];
    let local: Vec<Vec<Vec3>> = rings
        .iter()
        .map(|r| r.iter().map(|&p| geom::sub(p, origin)).collect())
        .collect();

    let newell = geom::newell_normal(&local[0]);
    let perimeter: f64 = (0..local[0].len())
        .map(|i| geom::dist(local[0][i], local[0][(i + 1) % local[0].len()]))
        .sum();
    if geom::norm(newell) <= 1e-12 * perimeter * perimeter {
        return Err(degenerate("exterior", "zero area"));
    }
    let (normal, centroid) = best_fit_plane(&local, newell);
    let plane_deviation = local
        .iter()
        .flatten()
        .map(|&p| geom::dot(geom::sub(p, centroid), normal).abs())
        .fold(0.0, f64::max);

    // In-plane basis with u × v = normal, so counter-clockwise in (u, v)
    // means the ring winds around +normal.
    let helper = if normal[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let u = unit(geom::cross(helper, normal));
    let v = geom::cross(normal, u);
    let project = |p: Vec3| -> Vec2 { [geom::dot(p, u), geom::dot(p, v)] };

    let mut points: Vec<Vec2> = Vec::new();
    let mut ring_ranges = Vec::new();
    for ring in &local {
        let start = points.len();
        points.extend(ring.iter().map(|&p| project(p)));
        ring_ranges.push(start..points.len());
    }

    let outer_area = geom::shoelace(&points[ring_ranges[0].clone()]);
    if outer_area <= 0.0 {
        // best-fit normal disagrees with the winding; cannot happen for a
        // simple planar ring
        return Err(degenerate("exterior", "self-intersecting"));
    }

    let mut polygon: Vec<usize> = ring_ranges[0].clone().collect();
    let mut holes: Vec<Vec<usize>> = Vec::new();
    for (h, range) in ring_ranges.iter().enumerate().skip(1) {
        let mut idx: Vec<usize> = range.clone().collect();
        let a = signed_area(&points, &idx);
        if a == 0.0 {
            return Err(degenerate(&format!("interior {}", h - 1), "zero area"));
        }
        if a > 0.0 {
            idx.reverse();
        }
        holes.push(idx);
    }
    // Bridge holes from the rightmost inward.
    holes.sort_by(|a, b| {
        let ax = a.iter().map(|&i| points[i][0]).fold(f64::MIN, f64::max);
        let bx = b.iter().map(|&i| points[i][0]).fold(f64::MIN, f64::max);
        bx.total_cmp(&ax)
    });
    for hole in holes {
        bridge_hole(&points, &mut polygon, &hole)
            .ok_or_else(|| degenerate("interior", "hole not inside the exterior ring"))?;
    }

    let scale = perimeter.max(f64::MIN_POSITIVE);
    let triangles = ear_clip(&points, polygon, 1e-12 * scale * scale)
        .ok_or_else(|| degenerate("exterior", "self-intersecting"))?;

    let vertices = rings.into_iter().flatten().collect();
    Ok(Triangulation {
        vertices,
        triangles,
        plane_deviation,
    })
}

fn distinct_count(ring: &[Vec3]) -> usize {
    let mut seen: Vec<Vec3> = Vec::new();
    for p in ring {
        if !seen.contains(p) {
            seen.push(*p);
        }
    }
    seen.len()
}

fn unit(a: Vec3) -> Vec3 {
    geom::scale(a, 1.0 / geom::norm(a))
}

/// Least-squares plane through all ring vertices; the normal is oriented to
/// agree with the Newell normal of the exterior ring.
fn best_fit_plane(rings: &[Vec<Vec3>], newell: Vec3) -> (Vec3, Vec3) {
    let pts: Vec<Vec3> = rings.iter().flatten().copied().collect();
    let n = pts.len() as f64;
    let c = geom::scale(pts.iter().fold([0.0; 3], |a, &p| geom::add(a, p)), 1.0 / n);
    let mut cov = Matrix3::<f64>::zeros();
    for p in &pts {
        let d = Vector3::from(geom::sub(*p, c));
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("3 eigenvalues");
    let e = eig.eigenvectors.column(imin);
    let mut normal = [e[0], e[1], e[2]];
    let newell_unit = unit(newell);
    // A nearly collinear ring can yield an in-plane eigenvector; fall back
    // to the Newell direction then.
    if geom::dot(normal, newell_unit).abs() < 0.5 {
        normal = newell_unit;
    } else if geom::dot(normal, newell_unit) < 0.0 {
        normal = geom::scale(normal, -1.0);
    }
    (unit(normal), c)
}

fn signed_area(points: &[Vec2], idx: &[usize]) -> f64 {
    let ring: Vec<Vec2> = idx.iter().map(|&i| points[i]).collect();
    geom::shoelace(&ring)
}

#[inline]
fn cross2(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Splices a clockwise hole into the counter-clockwise polygon through a
/// mutually visible vertex pair.
fn bridge_hole(points: &[Vec2], polygon: &mut Vec<usize>, hole: &[usize]) -> Option<()> {
    // rightmost hole vertex, lowest y on ties
    let (hm, &m) = hole.iter().enumerate().max_by(|a, b| {
        let (pa, pb) = (points[*a.1], points[*b.1]);
        pa[0].total_cmp(&pb[0]).then(pb[1].total_cmp(&pa[1]))
    })?;
    let mp = points[m];

    // Nearest intersection of the ray M + t(1, 0) with the polygon edges.
    let n = polygon.len();
    let mut best: Option<(f64, usize)> = None; // (x, polygon position of candidate)
    for i in 0..n {
        let a = points[polygon[i]];
        let b = points[polygon[(i + 1) % n]];
        if (a[1] > mp[1]) == (b[1] > mp[1]) && a[1] != mp[1] && b[1] != mp[1] {
            continue;
        }
        if a[1] == b[1] {
            // horizontal edge on the ray line: nearest endpoint to the right
            for (pos, p) in [(i, a), ((i + 1) % n, b)] {
                if p[1] == mp[1] && p[0] >= mp[0] && best.is_none_or(|(x, _)| p[0] < x) {
                    best = Some((p[0], pos));
                }
            }
            continue;
        }
        let t = (mp[1] - a[1]) / (b[1] - a[1]);
        if !(0.0..=1.0).contains(&t) {
            continue;
        }
        let x = a[0] + t * (b[0] - a[0]);
        if x < mp[0] {
            continue;
        }
        // candidate vertex: the intersection vertex itself, or the edge
        // endpoint with larger x
        let pos = if t == 0.0 {
            i
        } else if t == 1.0 {
            (i + 1) % n
        } else if a[0] > b[0] {
            i
        } else {
            (i + 1) % n
        };
        if best.is_none_or(|(bx, _)| x < bx) {
            best = Some((x, pos));
        }
    }
    let (ix, mut pos) = best?;
    let p = points[polygon[pos]];
    let i_pt = [ix, mp[1]];

    // Reflex vertices inside triangle (M, I, P) block visibility; pick the
    // one with the smallest angle to the ray instead.
    if p[1] != mp[1] {
        let mut best_angle = f64::INFINITY;
        let mut best_dist = f64::INFINITY;
        for k in 0..n {
            let q = points[polygon[k]];
            if polygon[k] == polygon[pos] {
                continue;
            }
            let prev = points[polygon[(k + n - 1) % n]];
            let next = points[polygon[(k + 1) % n]];
            let reflex = cross2(prev, q, next) <= 0.0;
            if reflex && point_in_triangle(q, mp, i_pt, p, 0.0) {
                let dx = q[0] - mp[0];
                let dy = (q[1] - mp[1]).abs();
                let angle = dy.atan2(dx);
                let d = dx * dx + dy * dy;
                if angle < best_angle || (angle == best_angle && d < best_dist) {
                    best_angle = angle;
                    best_dist = d;
                    pos = k;
                }
            }
        }
    }

    let mut spliced = Vec::with_capacity(n + hole.len() + 2);
    spliced.extend_from_slice(&polygon[..=pos]);
    for k in 0..=hole.len() {
        spliced.push(hole[(hm + k) % hole.len()]);
    }
    spliced.push(polygon[pos]);
    spliced.extend_from_slice(&polygon[pos + 1..]);
    *polygon = spliced;
    Some(())
}

/// Closed test with slack `eps`, so points on (or within rounding of) an
/// edge count as inside.
fn point_in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2, eps: f64) -> bool {
    let d1 = cross2(a, b, p);
    let d2 = cross2(b, c, p);
    let d3 = cross2(c, a, p);
    let neg = d1 < -eps || d2 < -eps || d3 < -eps;
    let pos = d1 > eps || d2 > eps || d3 > eps;
    !(neg && pos)
}

/// Ear clipping of a counter-clockwise polygon given as indices into
/// `points`. Near-collinear corners (|cross| <= eps) are never clipped as
/// ears, so vertices lying on straight edges stay part of the fan.
fn ear_clip(points: &[Vec2], mut poly: Vec<usize>, eps: f64) -> Option<Vec<[usize; 3]>> {
    let mut out = Vec::with_capacity(poly.len().saturating_sub(2));
    let mut i = 0;
    let mut stalled = 0;
    while poly.len() > 3 {
        let n = poly.len();
        let (ia, ib, ic) = (poly[(i + n - 1) % n], poly[i % n], poly[(i + 1) % n]);
        let (a, b, c) = (points[ia], points[ib], points[ic]);
        let convex = cross2(a, b, c) > eps;
        let is_ear = convex
            && poly.iter().all(|&k| {
                let q = points[k];
                q == a || q == b || q == c || !point_in_triangle(q, a, b, c, eps)
            });
        if is_ear {
            out.push([ia, ib, ic]);
            poly.remove(i % n);
            i %= poly.len();
            if i > 0 {
                i -= 1;
            }
            stalled = 0;
        } else {
            i = (i + 1) % n;
            stalled += 1;
            if stalled > n {
                // Whatever remains must be a zero-area sliver of collinear
                // points; anything else means the ring self-intersects.
                let rest: Vec<Vec2> = poly.iter().map(|&k| points[k]).collect();
                return (geom::shoelace(&rest).abs() <= eps * n as f64).then_some(out);
            }
        }
    }
    let (a, b, c) = (points[poly[0]], points[poly[1]], points[poly[2]]);
    if cross2(a, b, c) > eps {
        out.push([poly[0], poly[1], poly[2]]);
    } else if cross2(a, b, c) < -eps {
        return None;
    }
    Some(out)
}
