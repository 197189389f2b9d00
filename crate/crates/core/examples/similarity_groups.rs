//! Similarity grouping of buildings within square tiles, with a tau sweep
//! and GeoJSON output.

use rand::RngExt;
use urbanfold::geogroup::{choropleth, make_tiles, run_boundaries, sweep, CenterMethod, GeoEntity, DEFAULT_SWEEP};
use urbanfold::rng;
use urbanfold::store::Embeddings;

fn main() -> urbanfold::Result<()> {
    let mut r = rng::stream(2, "example-groups");
    let dim = 8;
    let styles: Vec<Vec<f32>> = (0..6).map(|_| (0..dim).map(|_| r.random::<f32>()).collect()).collect();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut entities = Vec::new();
    for i in 0..400 {
        let id = format!("B{i:04}");
        let style = &styles[r.random_range(0..styles.len())];
        values.extend(style.iter().map(|v| v + 0.4 * (r.random::<f32>() - 0.5)));
        entities.push(GeoEntity {
            building_id: id.clone(),
            location: [r.random::<f64>() * 2000.0, r.random::<f64>() * 2000.0],
            embedding_row: i,
        });
        ids.push(id);
    }
    let store = Embeddings::new(ids, dim, values)?;
    let tiles = make_tiles([0.0, 0.0, 2000.0, 2000.0], 1000.0, &entities)?;

    let run = run_boundaries(&tiles, &store, 0.03, CenterMethod::Geometric)?;
    for s in &run.summary {
        println!("{}: {} buildings in {} groups, k = {:.2}", s.boundary_id, s.count, s.groups, s.k_ratio);
    }
    for row in sweep(&tiles, &store, &DEFAULT_SWEEP, CenterMethod::Geometric)?.iter().filter(|r| r.boundary_id == tiles[0].boundary_id) {
        println!("tau {:.2}: {} groups", row.tau, row.groups);
    }
    let geojson = choropleth(&tiles, &run);
    println!("choropleth with {} features", geojson["features"].as_array().map_or(0, Vec::len));
    Ok(())
}
