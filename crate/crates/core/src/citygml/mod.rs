//! CityGML LoD2 ingestion and OBJ interchange.
//!
//! The parser accepts the subset of CityGML that carries LoD2 building
//! geometry as polygons with `posList`/`pos` coordinates, in either solid
//! (`lod2Solid`, possibly by `xlink:href`) or multi-surface form. Element
//! names are matched on their local part, so CityGML 1.0 and 2.0 documents
//! are read the same way.

mod obj;
mod parser;
mod triangulate;
mod writer;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::mesh::TriangleMesh;

pub use obj::{export_obj, import_obj};
pub use parser::{parse_citygml, parse_citygml_file};
pub use triangulate::{triangulate_polygon, PolygonSurface, Triangulation, PLANE_TOLERANCE};
pub use writer::{write_citygml, GmlBuilding, SurfaceKind};

/// One building with its triangulated LoD2 shell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingRecord {
    pub id: String,
    pub roof_type: Option<String>,
    pub function: Option<String>,
    pub measured_height: Option<f64>,
    /// Footprint centroid in the projected CRS (meters).
    pub anchor_point: Vec2,
    pub mesh: TriangleMesh,
    pub srs_name: Option<String>,
    /// Number of source polygons that produced `mesh`.
    pub polygon_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedBuilding {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub buildings_parsed: usize,
    pub buildings_skipped: Vec<SkippedBuilding>,
    pub non_building_skipped: usize,
    pub srs_names: BTreeSet<String>,
    /// Polygons whose vertices stray more than the plane tolerance from
    /// their best-fit plane (triangulated anyway).
    pub nonplanar_polygons: usize,
}

impl ParseReport {
    pub fn city_objects(&self) -> usize {
        self.buildings_parsed + self.buildings_skipped.len() + self.non_building_skipped
    }

    pub fn merge(&mut self, other: ParseReport) {
        self.buildings_parsed += other.buildings_parsed;
        self.buildings_skipped.extend(other.buildings_skipped);
        self.non_building_skipped += other.non_building_skipped;
        self.srs_names.extend(other.srs_names);
        self.nonplanar_polygons += other.nonplanar_polygons;
    }
}
