use std::collections::HashMap;
use std::io::{Read, Write};

use serde::Deserialize;
use serde_json::{json, Value};

use super::boundary::{Boundary, Rings, RunOutput, SweepRow};
use super::group::GeoEntity;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::store::Embeddings;

#[derive(Deserialize)]
struct EntityRow {
    building_id: String,
    x: f64,
    y: f64,
    #[serde(default)]
    boundary_id: Option<String>,
}

/// Reads `building_id,x,y[,boundary_id]`. Rows whose id is not in the
/// store keep `embedding_row = usize::MAX` so their boundary is skipped.
pub fn read_entities<R: Read>(input: R, store: &Embeddings) -> Result<Vec<(GeoEntity, Option<String>)>> {
    let index: HashMap<&str, usize> = store.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: EntityRow = row?;
        if !r.x.is_finite() || !r.y.is_finite() {
            return Err(Error::NonFinite(format!("location of {}", r.building_id)));
        }
        let embedding_row = index.get(r.building_id.as_str()).copied().unwrap_or(usize::MAX);
        out.push((
            GeoEntity {
                building_id: r.building_id,
                location: [r.x, r.y],
                embedding_row,
            },
            r.boundary_id.filter(|b| !b.is_empty()),
        ));
    }
    Ok(out)
}

/// `building_id,x,y,boundary_id`
pub fn write_entities<W: Write>(out: W, rows: &[(GeoEntity, Option<String>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["building_id", "x", "y", "boundary_id"])?;
    for (e, b) in rows {
        w.write_record([
            e.building_id.clone(),
            format!("{:?}", e.location[0]),
            format!("{:?}", e.location[1]),
            b.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("entities", e))?;
    Ok(())
}

fn ring(v: &Value) -> Result<Vec<Vec2>> {
    let bad = || Error::Format("GeoJSON ring is not a list of [x, y] positions".into());
    let mut pts: Vec<Vec2> = v
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|p| {
            let a = p.as_array().ok_or_else(bad)?;
            match (a.first().and_then(Value::as_f64), a.get(1).and_then(Value::as_f64)) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => Err(bad()),
            }
        })
        .collect::<Result<_>>()?;
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    Ok(pts)
}

/// Polygon / MultiPolygon features keyed by their `boundary_id` property.
pub fn read_boundary_polygons(text: &str) -> Result<Vec<(String, Rings)>> {
    let doc: Value = serde_json::from_str(text)?;
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| Error::Format("expected a GeoJSON FeatureCollection".into()))?;
    let mut out = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let id = match &f["properties"]["boundary_id"] {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            _ => return Err(Error::Format(format!("feature {i} has no boundary_id property"))),
        };
        let g = &f["geometry"];
        let rings = match g["type"].as_str() {
            Some("Polygon") => g["coordinates"].as_array().into_iter().flatten().map(ring).collect::<Result<Vec<_>>>()?,
            Some("MultiPolygon") => g["coordinates"]
                .as_array()
                .into_iter()
                .flatten()
                .flat_map(|poly| poly.as_array().into_iter().flatten())
                .map(ring)
                .collect::<Result<Vec<_>>>()?,
            other => return Err(Error::Format(format!("feature {id}: unsupported geometry {other:?}"))),
        };
        out.push((id, rings));
    }
    Ok(out)
}

/// `building_id,boundary_id,group`
pub fn write_assignments<W: Write>(out: W, run: &RunOutput) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["building_id", "boundary_id", "group"])?;
    for r in &run.results {
        for (id, g) in r.assignment.members.iter().zip(&r.assignment.groups) {
            w.write_record([id.as_str(), &r.boundary_id, &g.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("assignments", e))?;
    Ok(())
}

/// `boundary_id,count,groups,k_ratio`
pub fn write_summary<W: Write>(out: W, run: &RunOutput) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["boundary_id", "count", "groups", "k_ratio"])?;
    for s in &run.summary {
        w.write_record([s.boundary_id.clone(), s.count.to_string(), s.groups.to_string(), format!("{:?}", s.k_ratio)])?;
    }
    w.flush().map_err(|e| Error::io("summary", e))?;
    Ok(())
}

/// `boundary_id,tau,count,groups,k_ratio`
pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["boundary_id", "tau", "count", "groups", "k_ratio"])?;
    for s in rows {
        w.write_record([
            s.boundary_id.clone(),
            format!("{:?}", s.tau),
            s.count.to_string(),
            s.groups.to_string(),
            format!("{:?}", s.k_ratio),
        ])?;
    }
    w.flush().map_err(|e| Error::io("sweep", e))?;
    Ok(())
}

fn polygon_json(rings: &Rings) -> Value {
    let closed: Vec<Vec<Vec2>> = rings
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let Some(&first) = r.first() {
                r.push(first);
            }
            r
        })
        .collect();
    json!({ "type": "Polygon", "coordinates": closed })
}

/// Boundary or tile polygons carrying `k_ratio`; boundaries without a
/// geometry get a null one.
pub fn choropleth(boundaries: &[Boundary], run: &RunOutput) -> Value {
    let geometry: HashMap<&str, &Option<Rings>> = boundaries.iter().map(|b| (b.boundary_id.as_str(), &b.geometry)).collect();
    let features: Vec<Value> = run
        .summary
        .iter()
        .map(|s| {
            let g = geometry.get(s.boundary_id.as_str()).and_then(|g| g.as_ref()).map_or(Value::Null, polygon_json);
            json!({
                "type": "Feature",
                "geometry": g,
                "properties": {
                    "boundary_id": s.boundary_id,
                    "count": s.count,
                    "groups": s.groups,
                    "k_ratio": s.k_ratio,
                }
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

/// Building points carrying their `group` number.
pub fn group_points(boundaries: &[Boundary], run: &RunOutput) -> Value {
    let location: HashMap<(&str, &str), Vec2> = boundaries
        .iter()
        .flat_map(|b| b.members.iter().map(move |e| ((b.boundary_id.as_str(), e.building_id.as_str()), e.location)))
        .collect();
    let mut features = Vec::new();
    for r in &run.results {
        for (id, g) in r.assignment.members.iter().zip(&r.assignment.groups) {
            let p = location[&(r.boundary_id.as_str(), id.as_str())];
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": p },
                "properties": {
                    "building_id": id,
                    "boundary_id": r.boundary_id,
                    "group": g,
                    "seed": r.assignment.seeds[g - 1] == *id,
                }
            }));
        }
    }
    json!({ "type": "FeatureCollection", "features": features })
}
