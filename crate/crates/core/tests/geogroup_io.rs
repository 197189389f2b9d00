use std::collections::HashMap;

use serde_json::json;
use urbanfold::geogroup::{
    boundaries_from_column, boundaries_from_polygons, choropleth, group_points, read_boundary_polygons, read_entities,
    run_boundaries, write_assignments, write_summary, CenterMethod,
};
use urbanfold::store::Embeddings;

fn store() -> Embeddings {
    let ids: Vec<String> = ["a", "b", "c", "d", "e", "f"].iter().map(|s| s.to_string()).collect();
    let rows: [[f32; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.99, 0.05, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.98, 0.1],
        [0.0, 0.0, 1.0],
        [1.0, 0.01, 0.0],
    ];
    Embeddings::new(ids, 3, rows.concat()).unwrap()
}

const ENTITIES: &str = "building_id,x,y,boundary_id
a,10,10,west
b,12,11,west
c,15,9,west
d,110,10,east
e,112,12,east
f,111,8,east
";

#[test]
fn boundary_column_grouping() {
    let s = store();
    let rows = read_entities(ENTITIES.as_bytes(), &s).unwrap();
    let boundaries = boundaries_from_column(&rows);
    assert_eq!(boundaries.len(), 2);
    let run = run_boundaries(&boundaries, &s, 0.03, CenterMethod::Geometric).unwrap();
    let by_id: HashMap<&str, _> = run.summary.iter().map(|r| (r.boundary_id.as_str(), r)).collect();
    // west: a and b share a direction, c is alone
    assert_eq!(by_id["west"].groups, 2);
    assert_eq!(by_id["east"].groups, 3);
    assert_eq!(by_id["west"].k_ratio, 1.5);

    let mut csv = Vec::new();
    write_assignments(&mut csv, &run).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().next(), Some("building_id,boundary_id,group"));
    assert_eq!(text.lines().count(), 7);
    let mut csv = Vec::new();
    write_summary(&mut csv, &run).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("boundary_id,count,groups,k_ratio\n"));

    let pts = group_points(&boundaries, &run);
    assert_eq!(pts["features"].as_array().unwrap().len(), 6);
    let choro = choropleth(&boundaries, &run);
    assert!(choro["features"][0]["geometry"].is_null());
}

#[test]
fn polygon_boundaries_from_geojson() {
    let s = store();
    let rows = read_entities(ENTITIES.as_bytes(), &s).unwrap();
    let entities: Vec<_> = rows.into_iter().map(|(e, _)| e).collect();
    let fc = json!({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature", "properties": {"boundary_id": 7},
             "geometry": {"type": "Polygon", "coordinates": [[[0, 0], [50, 0], [50, 50], [0, 50], [0, 0]]]}},
            {"type": "Feature", "properties": {"boundary_id": "east"},
             "geometry": {"type": "MultiPolygon", "coordinates": [[[[100, 0], [150, 0], [150, 50], [100, 50], [100, 0]]]]}}
        ]
    });
    let polys = read_boundary_polygons(&fc.to_string()).unwrap();
    assert_eq!(polys.len(), 2);
    let boundaries = boundaries_from_polygons(&polys, &entities);
    let count: HashMap<&str, usize> = boundaries.iter().map(|b| (b.boundary_id.as_str(), b.members.len())).collect();
    assert_eq!(count["7"], 3);
    assert_eq!(count["east"], 3);
    let run = run_boundaries(&boundaries, &s, 0.03, CenterMethod::Coordinate).unwrap();
    let choro = choropleth(&boundaries, &run);
    assert_eq!(choro["features"][0]["geometry"]["type"], "Polygon");
    assert!(choro["features"][0]["properties"]["k_ratio"].is_number());
}

#[test]
fn missing_embedding_skips_the_boundary() {
    let s = store();
    let text = format!("{ENTITIES}zz,13,13,west\n");
    let rows = read_entities(text.as_bytes(), &s).unwrap();
    let run = run_boundaries(&boundaries_from_column(&rows), &s, 0.03, CenterMethod::Geometric).unwrap();
    assert_eq!(run.skipped.len(), 1);
    assert_eq!(run.skipped[0].0, "west");
    assert_eq!(run.summary.len(), 1);
}
