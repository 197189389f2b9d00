use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::name::QName;
use quick_xml::Reader;

use super::triangulate::{triangulate_polygon, PolygonSurface};
use super::{BuildingRecord, ParseReport, SkippedBuilding};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::MeshBuilder;

pub fn parse_citygml_file(path: &Path) -> Result<(Vec<BuildingRecord>, ParseReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_citygml(BufReader::new(file))
}

/// Parses a CityGML document, one building at a time.
///
/// Non-building city objects are skipped and counted; a building whose
/// geometry cannot be triangulated is skipped with a reason. Only malformed
/// XML aborts the parse.
pub fn parse_citygml<R: BufRead>(input: R) -> Result<(Vec<BuildingRecord>, ParseReport)> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().trim_text(true);
    let mut parser = Parser::default();
    let mut buf = Vec::new();
    let mut skip_buf = Vec::new();
    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| Error::Xml {
            offset: reader.error_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(e) => {
                let local = e.local_name().as_ref().to_vec();
                if parser.is_city_object_slot() && local != b"Building" {
                    parser.report.non_building_skipped += 1;
                    let name = e.name().as_ref().to_vec();
                    reader
                        .read_to_end_into(QName(&name), &mut skip_buf)
                        .map_err(|err| Error::Xml {
                            offset: reader.error_position(),
                            message: err.to_string(),
                        })?;
                    skip_buf.clear();
                } else {
                    parser.start(&e, local, false);
                }
            }
            Event::Empty(e) => {
                let local = e.local_name().as_ref().to_vec();
                if parser.is_city_object_slot() && local != b"Building" {
                    parser.report.non_building_skipped += 1;
                } else {
                    parser.start(&e, local, true);
                }
            }
            Event::End(_) => parser.end(),
            Event::Text(t) => {
                if parser.capturing_text() {
                    let s = t.decode().map_err(|err| Error::Xml {
                        offset: reader.buffer_position(),
                        message: err.to_string(),
                    })?;
                    parser.push_text(&s);
                }
            }
            Event::CData(t) => {
                if parser.capturing_text() {
                    parser.push_text(&String::from_utf8_lossy(&t.into_inner()));
                }
            }
            Event::GeneralRef(r) => {
                if parser.capturing_text() {
                    let name = String::from_utf8_lossy(&r.into_inner()).into_owned();
                    parser.push_text(&resolve_entity(&name));
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !parser.stack.is_empty() {
        return Err(Error::Xml {
            offset: reader.buffer_position(),
            message: format!(
                "unexpected end of document inside <{}>",
                String::from_utf8_lossy(parser.stack.last().expect("non-empty"))
            ),
        });
    }
    Ok((parser.records, parser.report))
}

fn resolve_entity(name: &str) -> String {
    match name {
        "amp" => "&".into(),
        "lt" => "<".into(),
        "gt" => ">".into(),
        "quot" => "\"".into(),
        "apos" => "'".into(),
        _ => {
            let code = if let Some(hex) = name.strip_prefix("#x") {
                u32::from_str_radix(hex, 16).ok()
            } else if let Some(dec) = name.strip_prefix('#') {
                dec.parse().ok()
            } else {
                None
            };
            code.and_then(char::from_u32)
                .map(String::from)
                .unwrap_or_default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GeomKind {
    Solid,
    Surface,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Capture {
    RoofType,
    Function,
    MeasuredHeight,
    PosList,
    Pos,
    Coordinates,
}

#[derive(Default)]
struct OwnerGeometry {
    solid_polygons: Vec<PolygonSurface>,
    solid_refs: Vec<String>,
    surface_polygons: Vec<PolygonSurface>,
}

struct PolygonCtx {
    depth: usize,
    id: Option<String>,
    exterior: Option<Vec<Vec3>>,
    interiors: Vec<Vec<Vec3>>,
    /// Some(true) inside an exterior ring, Some(false) inside an interior one.
    ring_is_exterior: Option<bool>,
    ring: Vec<Vec3>,
}

struct BuildingCtx {
    /// Stack depth of the Building element itself.
    depth: usize,
    id: Option<String>,
    roof_type: Option<String>,
    function: Option<String>,
    measured_height: Option<String>,
    srs: Option<String>,
    owners: Vec<OwnerGeometry>,
    owner_stack: Vec<(usize, usize)>, // (owner index, element depth)
    by_id: HashMap<String, PolygonSurface>,
    lod2: Option<(usize, GeomKind)>,
    polygon: Option<PolygonCtx>,
    capture: Option<(Capture, usize)>,
    text: String,
    srs_dimension: usize,
    error: Option<String>,
}

impl BuildingCtx {
    fn new(depth: usize, id: Option<String>) -> Self {
        BuildingCtx {
            depth,
            id,
            roof_type: None,
            function: None,
            measured_height: None,
            srs: None,
            owners: vec![OwnerGeometry::default()],
            owner_stack: vec![(0, depth)],
            by_id: HashMap::new(),
            lod2: None,
            polygon: None,
            capture: None,
            text: String::new(),
            srs_dimension: 3,
            error: None,
        }
    }

    fn fail(&mut self, reason: String) {
        if self.error.is_none() {
            self.error = Some(reason);
        }
    }

    fn owner(&mut self) -> &mut OwnerGeometry {
        let idx = self.owner_stack.last().expect("building owner").0;
        &mut self.owners[idx]
    }
}

#[derive(Default)]
struct Parser {
    stack: Vec<Vec<u8>>,
    building: Option<BuildingCtx>,
    doc_srs: Option<String>,
    seen_ids: std::collections::HashSet<String>,
    records: Vec<BuildingRecord>,
    report: ParseReport,
}

fn attr(e: &BytesStart<'_>, local: &[u8]) -> Option<String> {
    e.attributes().flatten().find_map(|a| {
        (a.key.local_name().as_ref() == local).then(|| {
            a.unescape_value()
                .map(|v| v.into_owned())
                .unwrap_or_else(|_| String::from_utf8_lossy(&a.value).into_owned())
        })
    })
}

impl Parser {
    fn is_city_object_slot(&self) -> bool {
        self.building.is_none()
            && self
                .stack
                .last()
                .is_some_and(|top| top.as_slice() == b"cityObjectMember")
    }

    fn capturing_text(&self) -> bool {
        self.building.as_ref().is_some_and(|b| b.capture.is_some())
    }

    fn push_text(&mut self, s: &str) {
        if let Some(b) = self.building.as_mut() {
            if !b.text.is_empty() {
                b.text.push(' ');
            }
            b.text.push_str(s);
        }
    }

    fn start(&mut self, e: &BytesStart<'_>, local: Vec<u8>, empty: bool) {
        let depth = self.stack.len();
        let srs = attr(e, b"srsName");

        if self.building.is_none() {
            if let Some(s) = srs {
                self.doc_srs.get_or_insert(s);
            }
            if local == b"Building" {
                self.building = Some(BuildingCtx::new(depth, attr(e, b"id")));
                if empty {
                    self.finish_building();
                    return;
                }
            }
            if !empty {
                self.stack.push(local);
            }
            return;
        }

        let b = self.building.as_mut().expect("inside building");
        if let Some(s) = srs {
            b.srs.get_or_insert(s);
        }
        if let Some(dim) = attr(e, b"srsDimension").and_then(|d| d.parse().ok()) {
            b.srs_dimension = dim;
        }
        let name = local.as_slice();

        // Thematic attributes are direct children of the Building element.
        if depth == b.depth + 1 {
            let capture = match name {
                b"roofType" => Some(Capture::RoofType),
                b"function" => Some(Capture::Function),
                b"measuredHeight" => Some(Capture::MeasuredHeight),
                _ => None,
            };
            if let Some(c) = capture {
                b.capture = Some((c, depth));
                b.text.clear();
            }
        }

        match name {
            b"BuildingPart" => {
                b.owners.push(OwnerGeometry::default());
                let idx = b.owners.len() - 1;
                b.owner_stack.push((idx, depth));
            }
            n if b.lod2.is_none() && n.starts_with(b"lod2") => {
                if n.ends_with(b"Solid") {
                    b.lod2 = Some((depth, GeomKind::Solid));
                } else if n == b"lod2MultiSurface" || n == b"lod2Geometry" {
                    b.lod2 = Some((depth, GeomKind::Surface));
                }
            }
            b"surfaceMember" => {
                if let (Some((_, GeomKind::Solid)), Some(href)) = (b.lod2, attr(e, b"href")) {
                    let id = href.trim_start_matches('#').to_string();
                    b.owner().solid_refs.push(id);
                }
            }
            b"Polygon" if b.lod2.is_some() && b.polygon.is_none() => {
                b.polygon = Some(PolygonCtx {
                    depth,
                    id: attr(e, b"id"),
                    exterior: None,
                    interiors: Vec::new(),
                    ring_is_exterior: None,
                    ring: Vec::new(),
                });
            }
            b"exterior" | b"outerBoundaryIs" => {
                if let Some(p) = b.polygon.as_mut() {
                    p.ring_is_exterior = Some(true);
                    p.ring.clear();
                }
            }
            b"interior" | b"innerBoundaryIs" => {
                if let Some(p) = b.polygon.as_mut() {
                    p.ring_is_exterior = Some(false);
                    p.ring.clear();
                }
            }
            b"posList" | b"pos" | b"coordinates" => {
                if b.polygon.as_ref().is_some_and(|p| p.ring_is_exterior.is_some()) {
                    let c = match name {
                        b"posList" => Capture::PosList,
                        b"pos" => Capture::Pos,
                        _ => Capture::Coordinates,
                    };
                    b.capture = Some((c, depth));
                    b.text.clear();
                }
            }
            _ => {}
        }

        if empty {
            self.stack.push(local);
            self.end();
        } else {
            self.stack.push(local);
        }
    }

    fn end(&mut self) {
        let Some(local) = self.stack.pop() else {
            return;
        };
        let depth = self.stack.len();
        let Some(b) = self.building.as_mut() else {
            return;
        };
        if depth == b.depth {
            self.finish_building();
            return;
        }

        if let Some((capture, cdepth)) = b.capture {
            if cdepth == depth {
                b.capture = None;
                let text = std::mem::take(&mut b.text);
                match capture {
                    Capture::RoofType => {
                        b.roof_type.get_or_insert(text.trim().to_string());
                    }
                    Capture::Function => {
                        b.function.get_or_insert(text.trim().to_string());
                    }
                    Capture::MeasuredHeight => {
                        b.measured_height.get_or_insert(text.trim().to_string());
                    }
                    Capture::PosList | Capture::Pos | Capture::Coordinates => {
                        let coords = if capture == Capture::Coordinates {
                            text.replace(',', " ")
                        } else {
                            text
                        };
                        let dim = if capture == Capture::Coordinates {
                            3
                        } else {
                            b.srs_dimension
                        };
                        match parse_positions(&coords, dim) {
                            Ok(pts) => {
                                if let Some(p) = b.polygon.as_mut() {
                                    p.ring.extend(pts);
                                }
                            }
                            Err(msg) => b.fail(msg),
                        }
                    }
                }
            }
        }

        match local.as_slice() {
            b"exterior" | b"outerBoundaryIs" | b"interior" | b"innerBoundaryIs" => {
                if let Some(p) = b.polygon.as_mut() {
                    let ring = std::mem::take(&mut p.ring);
                    match p.ring_is_exterior.take() {
                        Some(true) => p.exterior = Some(ring),
                        Some(false) => p.interiors.push(ring),
                        None => {}
                    }
                }
            }
            b"Polygon" => {
                if b.polygon.as_ref().is_some_and(|p| p.depth == depth) {
                    let p = b.polygon.take().expect("polygon");
                    match p.exterior {
                        Some(ext) => {
                            let surface = PolygonSurface::new(ext, p.interiors);
                            if let Some(id) = p.id {
                                b.by_id.insert(id, surface.clone());
                            }
                            let kind = b.lod2.map(|(_, k)| k).unwrap_or(GeomKind::Surface);
                            let owner = b.owner();
                            match kind {
                                GeomKind::Solid => owner.solid_polygons.push(surface),
                                GeomKind::Surface => owner.surface_polygons.push(surface),
                            }
                        }
                        None => b.fail(format!(
                            "polygon {} has no exterior ring",
                            p.id.as_deref().unwrap_or("<anonymous>")
                        )),
                    }
                }
            }
            _ => {}
        }

        if b.lod2.is_some_and(|(d, _)| d == depth) {
            b.lod2 = None;
        }
        if b.owner_stack.len() > 1 && b.owner_stack.last().is_some_and(|&(_, d)| d == depth) {
            b.owner_stack.pop();
        }
    }

    fn finish_building(&mut self) {
        let b = self.building.take().expect("building context");
        let id = b.id.clone().unwrap_or_default();
        let skip = |report: &mut ParseReport, reason: String| {
            report.buildings_skipped.push(SkippedBuilding {
                id: id.clone(),
                reason,
            });
        };
        if id.is_empty() {
            skip(&mut self.report, "missing gml:id".into());
            return;
        }
        if !self.seen_ids.insert(id.clone()) {
            skip(&mut self.report, "duplicate gml:id".into());
            return;
        }
        if let Some(reason) = b.error.clone() {
            skip(&mut self.report, reason);
            return;
        }
        match assemble(&b, &mut self.report) {
            Ok(mut record) => {
                if record.srs_name.is_none() {
                    record.srs_name = self.doc_srs.clone();
                }
                if let Some(s) = &record.srs_name {
                    self.report.srs_names.insert(s.clone());
                }
                self.report.buildings_parsed += 1;
                self.records.push(record);
            }
            Err(reason) => skip(&mut self.report, reason),
        }
    }
}

fn parse_positions(text: &str, dim: usize) -> std::result::Result<Vec<Vec3>, String> {
    if !(2..=3).contains(&dim) {
        return Err(format!("unsupported srsDimension {dim}"));
    }
    let values = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad coordinate {t:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if values.len() % dim != 0 {
        return Err(format!(
            "coordinate count {} is not a multiple of {dim}",
            values.len()
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    Ok(values
        .chunks_exact(dim)
        .map(|c| [c[0], c[1], if dim == 3 { c[2] } else { 0.0 }])
        .collect())
}

fn assemble(b: &BuildingCtx, report: &mut ParseReport) -> std::result::Result<BuildingRecord, String> {
    let mut polygons: Vec<&PolygonSurface> = Vec::new();
    for owner in &b.owners {
        if owner.solid_polygons.is_empty() && owner.solid_refs.is_empty() {
            polygons.extend(owner.surface_polygons.iter());
        } else {
            polygons.extend(owner.solid_polygons.iter());
            for r in &owner.solid_refs {
                let p = b
                    .by_id
                    .get(r)
                    .ok_or_else(|| format!("unresolved surface reference #{r}"))?;
                polygons.push(p);
            }
        }
    }
    if polygons.is_empty() {
        return Err("no LoD2 geometry".into());
    }

    let mut builder = MeshBuilder::new();
    for (i, poly) in polygons.iter().enumerate() {
        let tri = triangulate_polygon(poly).map_err(|e| format!("polygon {i}: {e}"))?;
        if !tri.is_planar() {
            report.nonplanar_polygons += 1;
        }
        for t in &tri.triangles {
            builder.triangle(tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]]);
        }
    }
    let mut mesh = builder.finish();
    mesh.cleanup();
    if mesh.is_empty() {
        return Err("geometry has zero area".into());
    }
    let anchor_point = mesh
        .footprint_centroid()
        .ok_or_else(|| "footprint has zero area".to_string())?;
    let measured_height = b
        .measured_height
        .as_deref()
        .and_then(|h| h.parse::<f64>().ok())
        .filter(|h| h.is_finite());
    Ok(BuildingRecord {
        id: b.id.clone().unwrap_or_default(),
        roof_type: b.roof_type.clone(),
        function: b.function.clone(),
        measured_height,
        anchor_point,
        mesh,
        srs_name: b.srs.clone(),
        polygon_count: polygons.len(),
    })
}
