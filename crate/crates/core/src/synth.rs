//! Procedural LoD2-style buildings with known shape families, used as a
//! labeled stand-in for real building stock.
//!
//! Footprints are axis-aligned: a rectangle, an L (rectangle with one
//! quadrant cut away) or a U (rectangle with a notch in one long side).
//! Roofs are flat, shed ("pent"), gable or hip. Gable and hip roofs are
//! built on rectangular footprints only; L and U footprints take flat or
//! shed roofs, which keeps every mesh closed without solid boolean
//! operations.
//!
//! L parameterization: the cut-away quadrant spans `L_CUT` of the width and
//! of the depth, so the footprint area is `w·d·(1 − L_CUT²)`.
//! U parameterization: the notch is `U_NOTCH_WIDTH·w` wide, centered, and
//! `U_NOTCH_DEPTH·d` deep, so the area is `w·d·(1 − U_NOTCH_WIDTH·U_NOTCH_DEPTH)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::citygml::{triangulate_polygon, BuildingRecord, GmlBuilding, PolygonSurface, SurfaceKind};
use crate::error::{Error, Result};
use crate::geom::{self, Vec2, Vec3};
use crate::mesh::MeshBuilder;
use crate::rng;

pub const L_CUT: f64 = 0.5;
pub const U_NOTCH_WIDTH: f64 = 1.0 / 3.0;
pub const U_NOTCH_DEPTH: f64 = 0.5;
/// Hip ridge inset as a fraction of the shorter side, capped so the ridge
/// keeps at least 20% of the longer side.
const HIP_INSET: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Footprint {
    Rect,
    L,
    U,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Roof {
    Flat,
    Gable,
    Hip,
    Pent,
}

impl fmt::Display for Footprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Footprint::Rect => "rect",
            Footprint::L => "L",
            Footprint::U => "U",
        })
    }
}

impl fmt::Display for Roof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Roof::Flat => "flat",
            Roof::Gable => "gable",
            Roof::Hip => "hip",
            Roof::Pent => "pent",
        })
    }
}

impl FromStr for Footprint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "box" => Ok(Footprint::Rect),
            "l" => Ok(Footprint::L),
            "u" => Ok(Footprint::U),
            _ => Err(Error::InvalidArgument(format!("unknown footprint {s:?}"))),
        }
    }
}

impl FromStr for Roof {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flat" => Ok(Roof::Flat),
            "gable" => Ok(Roof::Gable),
            "hip" => Ok(Roof::Hip),
            "pent" | "shed" => Ok(Roof::Pent),
            _ => Err(Error::InvalidArgument(format!("unknown roof {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub footprint: Footprint,
    pub roof: Roof,
    pub width: f64,
    pub depth: f64,
    pub eave_height: f64,
    pub roof_height: f64,
    pub location: Vec2,
    /// Picks the mirror variant of L and U footprints.
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, v) in [
            ("width", self.width),
            ("depth", self.depth),
            ("eave_height", self.eave_height),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.location.iter().all(|c| c.is_finite()) {
            return bad("location must be finite".into());
        }
        match (self.roof, self.roof_height) {
            (Roof::Flat, h) if h != 0.0 => bad(format!("flat roof needs roof_height 0, got {h}")),
            (Roof::Flat, _) => Ok(()),
            (_, h) if !(h > 0.0 && h.is_finite()) => {
                bad(format!("{} roof needs positive roof_height, got {h}", self.roof))
            }
            (Roof::Gable | Roof::Hip, _) if self.footprint != Footprint::Rect => bad(format!(
                "{} roofs are only generated on rect footprints",
                self.roof
            )),
            _ => Ok(()),
        }
    }

    /// Counter-clockwise footprint ring in local coordinates, with the
    /// bounding box anchored at the origin.
    fn local_footprint(&self) -> Vec<Vec2> {
        let (w, d) = (self.width, self.depth);
        let mirror = self.seed % 2 == 1;
        let ring: Vec<Vec2> = match self.footprint {
            Footprint::Rect => vec![[0.0, 0.0], [w, 0.0], [w, d], [0.0, d]],
            Footprint::L => {
                let (cx, cy) = (w * (1.0 - L_CUT), d * (1.0 - L_CUT));
                vec![[0.0, 0.0], [w, 0.0], [w, cy], [cx, cy], [cx, d], [0.0, d]]
            }
            Footprint::U => {
                let nx0 = w * (1.0 - U_NOTCH_WIDTH) / 2.0;
                let nx1 = w - nx0;
                let ny = d * (1.0 - U_NOTCH_DEPTH);
                vec![
                    [0.0, 0.0],
                    [w, 0.0],
                    [w, d],
                    [nx1, d],
                    [nx1, ny],
                    [nx0, ny],
                    [nx0, d],
                    [0.0, d],
                ]
            }
        };
        if mirror {
            // reflect x and restore counter-clockwise order
            let mut r: Vec<Vec2> = ring.iter().map(|p| [w - p[0], p[1]]).collect();
            r.reverse();
            r
        } else {
            ring
        }
    }

    /// Footprint ring placed so its area centroid sits on `location`.
    pub fn footprint(&self) -> Vec<Vec2> {
        let ring = self.local_footprint();
        let c = polygon_centroid(&ring);
        ring.iter()
            .map(|p| [p[0] - c[0] + self.location[0], p[1] - c[1] + self.location[1]])
            .collect()
    }

    pub fn footprint_area(&self) -> f64 {
        geom::shoelace(&self.local_footprint())
    }
}

fn polygon_centroid(ring: &[Vec2]) -> Vec2 {
    let a = geom::shoelace(ring);
    let n = ring.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let cr = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

/// Boundary polygons of the building, outward-oriented.
pub fn surfaces(spec: &SynthSpec) -> Result<Vec<(SurfaceKind, PolygonSurface)>> {
    spec.validate()?;
    let fp = spec.footprint();
    let at = |p: Vec2, z: f64| -> Vec3 { [p[0], p[1], z] };
    let mut out = Vec::new();

    let ground: Vec<Vec3> = fp.iter().rev().map(|&p| at(p, 0.0)).collect();
    out.push((SurfaceKind::Ground, PolygonSurface::new(ground, vec![])));

    match spec.roof {
        Roof::Flat | Roof::Pent => {
            let (ymin, ymax) = fp
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
            let top = |p: Vec2| -> f64 {
                match spec.roof {
                    Roof::Pent => spec.eave_height + spec.roof_height * (p[1] - ymin) / (ymax - ymin),
                    _ => spec.eave_height,
                }
            };
            let n = fp.len();
            for i in 0..n {
                let (p, q) = (fp[i], fp[(i + 1) % n]);
                let wall = vec![at(p, 0.0), at(q, 0.0), at(q, top(q)), at(p, top(p))];
                out.push((SurfaceKind::Wall, PolygonSurface::new(wall, vec![])));
            }
            let roof: Vec<Vec3> = fp.iter().map(|&p| at(p, top(p))).collect();
            out.push((SurfaceKind::Roof, PolygonSurface::new(roof, vec![])));
        }
        Roof::Gable | Roof::Hip => {
            let e = spec.eave_height;
            let t = e + spec.roof_height;
            let n = fp.len();
            for i in 0..n {
                let (p, q) = (fp[i], fp[(i + 1) % n]);
                let wall = vec![at(p, 0.0), at(q, 0.0), at(q, e), at(p, e)];
                out.push((SurfaceKind::Wall, PolygonSurface::new(wall, vec![])));
            }
            // fp = [sw, se, ne, nw]; the ridge runs along the longer side
            let (sw, se, ne, nw) = (fp[0], fp[1], fp[2], fp[3]);
            let along_x = spec.width >= spec.depth;
            let (long, short) = if along_x {
                (spec.width, spec.depth)
            } else {
                (spec.depth, spec.width)
            };
            let inset = if spec.roof == Roof::Hip {
                (HIP_INSET * short).min(0.4 * long)
            } else {
                0.0
            };
            let mid = |a: Vec2, b: Vec2| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let planes: [(Vec2, Vec2, Vec2, Vec2); 4] = if along_x {
                // ridge from west to east
                let r0 = mid(sw, nw);
                let r1 = mid(se, ne);
                let r0 = [r0[0] + inset, r0[1]];
                let r1 = [r1[0] - inset, r1[1]];
                [(sw, se, r1, r0), (ne, nw, r0, r1), (se, ne, r1, r1), (nw, sw, r0, r0)]
            } else {
                let r0 = mid(sw, se);
                let r1 = mid(nw, ne);
                let r0 = [r0[0], r0[1] + inset];
                let r1 = [r1[0], r1[1] - inset];
                [(se, ne, r1, r0), (nw, sw, r0, r1), (ne, nw, r1, r1), (sw, se, r0, r0)]
            };
            for (k, (a, b, c, d)) in planes.into_iter().enumerate() {
                let poly = if k < 2 {
                    vec![at(a, e), at(b, e), at(c, t), at(d, t)]
                } else {
                    vec![at(a, e), at(b, e), at(c, t)]
                };
                out.push((SurfaceKind::Roof, PolygonSurface::new(poly, vec![])));
            }
        }
    }
    Ok(out)
}

/// Builds the record the parser would produce for this building.
pub fn generate(id: &str, spec: &SynthSpec) -> Result<BuildingRecord> {
    let polys = surfaces(spec)?;
    let mut builder = MeshBuilder::new();
    for (_, poly) in &polys {
        let tri = triangulate_polygon(poly)?;
        for t in &tri.triangles {
            builder.triangle(tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]]);
        }
    }
    let mut mesh = builder.finish();
    mesh.cleanup();
    Ok(BuildingRecord {
        id: id.to_string(),
        roof_type: Some(spec.roof.to_string()),
        function: Some(spec.footprint.to_string()),
        measured_height: Some(spec.eave_height + spec.roof_height),
        anchor_point: spec.location,
        mesh,
        srs_name: None,
        polygon_count: polys.len(),
    })
}

pub fn to_gml(id: &str, spec: &SynthSpec) -> Result<GmlBuilding> {
    Ok(GmlBuilding {
        id: id.to_string(),
        function: Some(spec.footprint.to_string()),
        roof_type: Some(spec.roof.to_string()),
        measured_height: Some(spec.eave_height + spec.roof_height),
        surfaces: surfaces(spec)?,
    })
}

/// Parameter ranges (meters) for one family of synthetic buildings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub footprint: Footprint,
    pub roof: Roof,
    pub width: (f64, f64),
    pub depth: (f64, f64),
    pub eave_height: (f64, f64),
    /// Roof height as a fraction of the building depth.
    pub roof_ratio: (f64, f64),
}

impl Family {
    pub fn new(footprint: Footprint, roof: Roof, size: SizeClass) -> Self {
        let (width, depth, eave_height) = match size {
            SizeClass::Small => ((8.0, 12.0), (6.0, 9.0), (3.0, 6.0)),
            SizeClass::Medium => ((14.0, 20.0), (10.0, 14.0), (6.0, 10.0)),
            SizeClass::Large => ((26.0, 38.0), (16.0, 22.0), (10.0, 16.0)),
        };
        let roof_ratio = match roof {
            Roof::Flat => (0.0, 0.0),
            Roof::Pent => (0.12, 0.2),
            Roof::Gable | Roof::Hip => (0.3, 0.5),
        };
        Family {
            footprint,
            roof,
            width,
            depth,
            eave_height,
            roof_ratio,
        }
    }

    /// Label used in the labels CSV and cluster-purity checks.
    pub fn label(&self) -> String {
        format!("{}-{}", self.footprint, self.roof)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl FromStr for Family {
    type Err = Error;

    /// `footprint-roof[-size]`, e.g. `rect-gable-large` or `u-flat`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        let size = match parts.get(2).copied() {
            None | Some("medium") => SizeClass::Medium,
            Some("small") => SizeClass::Small,
            Some("large") => SizeClass::Large,
            Some(other) => {
                return Err(Error::InvalidArgument(format!("unknown size class {other:?}")))
            }
        };
        if parts.len() < 2 || parts.len() > 3 {
            return Err(Error::InvalidArgument(format!(
                "family {s:?} is not footprint-roof[-size]"
            )));
        }
        let fam = Family::new(parts[0].parse()?, parts[1].parse()?, size);
        if matches!(fam.roof, Roof::Gable | Roof::Hip) && fam.footprint != Footprint::Rect {
            return Err(Error::InvalidArgument(format!(
                "family {s:?}: gable and hip roofs need a rect footprint"
            )));
        }
        Ok(fam)
    }
}

/// Axis-aligned bounding box `[xmin, ymin, xmax, ymax]` in meters.
pub type BBox = [f64; 4];

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub ids: Vec<String>,
    pub specs: Vec<SynthSpec>,
    pub records: Vec<BuildingRecord>,
}

/// Samples `count` buildings, cycling through `mix` so families are balanced,
/// with locations uniform in `bbox`.
pub fn generate_dataset(count: usize, mix: &[Family], bbox: BBox, seed: u64) -> Result<SynthDataset> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    if mix.is_empty() {
        return Err(Error::InvalidArgument("family mix is empty".into()));
    }
    if !(bbox[2] > bbox[0] && bbox[3] > bbox[1]) {
        return Err(Error::InvalidArgument(format!("degenerate bbox {bbox:?}")));
    }
    let mut r = rng::stream(seed, "synth");
    let mut uniform = |(lo, hi): (f64, f64)| lo + (hi - lo) * r.random::<f64>();
    let mut ids = Vec::with_capacity(count);
    let mut specs = Vec::with_capacity(count);
    for i in 0..count {
        let fam = &mix[i % mix.len()];
        let width = uniform(fam.width);
        let depth = uniform(fam.depth);
        let eave_height = uniform(fam.eave_height);
        let roof_height = if fam.roof == Roof::Flat {
            0.0
        } else {
            depth * uniform(fam.roof_ratio)
        };
        let location = [uniform((bbox[0], bbox[2])), uniform((bbox[1], bbox[3]))];
        let variant = (uniform((0.0, 2.0)) as u64).min(1);
        ids.push(format!("SYN_{i:06}"));
        specs.push(SynthSpec {
            footprint: fam.footprint,
            roof: fam.roof,
            width,
            depth,
            eave_height,
            roof_height,
            location,
            seed: variant,
        });
    }
    let records = ids
        .iter()
        .zip(&specs)
        .map(|(id, s)| generate(id, s))
        .collect::<Result<_>>()?;
    Ok(SynthDataset {
        ids,
        specs,
        records,
    })
}

impl SynthDataset {
    /// `building_id,footprint,roof,width,depth,eave_height,roof_height`
    pub fn write_labels<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["building_id", "footprint", "roof", "width", "depth", "eave_height", "roof_height"])?;
        for (id, s) in self.ids.iter().zip(&self.specs) {
            w.write_record([
                id.clone(),
                s.footprint.to_string(),
                s.roof.to_string(),
                format!("{:?}", s.width),
                format!("{:?}", s.depth),
                format!("{:?}", s.eave_height),
                format!("{:?}", s.roof_height),
            ])?;
        }
        w.flush().map_err(|e| Error::io("labels", e))?;
        Ok(())
    }

    pub fn gml_buildings(&self) -> Result<Vec<GmlBuilding>> {
        self.ids
            .iter()
            .zip(&self.specs)
            .map(|(id, s)| to_gml(id, s))
            .collect()
    }
}
