use std::io::Write;

use quick_xml::escape::escape;

use super::triangulate::PolygonSurface;
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    Ground,
    Wall,
    Roof,
}

impl SurfaceKind {
    fn element(self) -> &'static str {
        match self {
            SurfaceKind::Ground => "GroundSurface",
            SurfaceKind::Wall => "WallSurface",
            SurfaceKind::Roof => "RoofSurface",
        }
    }
}

/// A building ready to be written as CityGML: thematic attributes plus its
/// boundary polygons in output order.
#[derive(Clone, Debug, PartialEq)]
pub struct GmlBuilding {
    pub id: String,
    pub function: Option<String>,
    pub roof_type: Option<String>,
    pub measured_height: Option<f64>,
    pub surfaces: Vec<(SurfaceKind, PolygonSurface)>,
}

fn pos_list(ring: &[Vec3]) -> String {
    let mut s = String::new();
    for p in ring.iter().chain(ring.first()) {
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(&format!("{:?} {:?} {:?}", p[0], p[1], p[2]));
    }
    s
}

/// Writes a CityGML 2.0 document. Each building's polygons go into
/// thematic boundary surfaces (`lod2MultiSurface`) and the `lod2Solid`
/// references them by `xlink:href`, in polygon order.
pub fn write_citygml<W: Write>(
    out: &mut W,
    buildings: &[GmlBuilding],
    srs_name: &str,
) -> std::io::Result<()> {
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        out,
        r#"<core:CityModel xmlns:core="http://www.opengis.net/citygml/2.0" xmlns:bldg="http://www.opengis.net/citygml/building/2.0" xmlns:gml="http://www.opengis.net/gml" xmlns:xlink="http://www.w3.org/1999/xlink">"#
    )?;
    let (lo, hi) = envelope(buildings);
    writeln!(
        out,
        r#"  <gml:boundedBy><gml:Envelope srsName="{}" srsDimension="3"><gml:lowerCorner>{:?} {:?} {:?}</gml:lowerCorner><gml:upperCorner>{:?} {:?} {:?}</gml:upperCorner></gml:Envelope></gml:boundedBy>"#,
        escape(srs_name),
        lo[0],
        lo[1],
        lo[2],
        hi[0],
        hi[1],
        hi[2]
    )?;
    for b in buildings {
        let id = escape(b.id.as_str());
        writeln!(out, "  <core:cityObjectMember>")?;
        writeln!(out, r#"    <bldg:Building gml:id="{id}">"#)?;
        if let Some(f) = &b.function {
            writeln!(out, "      <bldg:function>{}</bldg:function>", escape(f.as_str()))?;
        }
        if let Some(r) = &b.roof_type {
            writeln!(out, "      <bldg:roofType>{}</bldg:roofType>", escape(r.as_str()))?;
        }
        if let Some(h) = b.measured_height {
            writeln!(
                out,
                r#"      <bldg:measuredHeight uom="urn:adv:uom:m">{h:?}</bldg:measuredHeight>"#
            )?;
        }
        writeln!(
            out,
            "      <bldg:lod2Solid><gml:Solid><gml:exterior><gml:CompositeSurface>"
        )?;
        for i in 0..b.surfaces.len() {
            writeln!(
                out,
                "        <gml:surfaceMember xlink:href=\"#{id}_p{i}\"/>"
            )?;
        }
        writeln!(
            out,
            "      </gml:CompositeSurface></gml:exterior></gml:Solid></bldg:lod2Solid>"
        )?;
        for (i, (kind, poly)) in b.surfaces.iter().enumerate() {
            let el = kind.element();
            writeln!(out, "      <bldg:boundedBy><bldg:{el} gml:id=\"{id}_s{i}\">")?;
            write!(
                out,
                "        <bldg:lod2MultiSurface><gml:MultiSurface><gml:surfaceMember><gml:Polygon gml:id=\"{id}_p{i}\">"
            )?;
            write!(
                out,
                "<gml:exterior><gml:LinearRing><gml:posList srsDimension=\"3\">{}</gml:posList></gml:LinearRing></gml:exterior>",
                pos_list(&poly.exterior_ring)
            )?;
            for hole in &poly.interior_rings {
                write!(
                    out,
                    "<gml:interior><gml:LinearRing><gml:posList srsDimension=\"3\">{}</gml:posList></gml:LinearRing></gml:interior>",
                    pos_list(hole)
                )?;
            }
            writeln!(
                out,
                "</gml:Polygon></gml:surfaceMember></gml:MultiSurface></bldg:lod2MultiSurface>"
            )?;
            writeln!(out, "      </bldg:{el}></bldg:boundedBy>")?;
        }
        writeln!(out, "    </bldg:Building>")?;
        writeln!(out, "  </core:cityObjectMember>")?;
    }
    writeln!(out, "</core:CityModel>")?;
    Ok(())
}

fn envelope(buildings: &[GmlBuilding]) -> (Vec3, Vec3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for b in buildings {
        for (_, poly) in &b.surfaces {
            for p in &poly.exterior_ring {
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
    }
    if lo[0] > hi[0] {
        return ([0.0; 3], [0.0; 3]);
    }
    (lo, hi)
}
