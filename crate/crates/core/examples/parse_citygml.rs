//! Parses a CityGML file, checks every building shell and prints a summary.
//! Without an argument a synthetic file is generated first.
//!
//! cargo run --example parse_citygml -- [file.gml]

use std::io::Cursor;

use urbanfold::citygml::{parse_citygml, parse_citygml_file, write_citygml};
use urbanfold::mesh::watertight_check;
use urbanfold::synth::generate_dataset;

fn main() -> urbanfold::Result<()> {
    let (records, report) = match std::env::args().nth(1) {
        Some(path) => parse_citygml_file(path.as_ref())?,
        None => {
            let mix = ["rect-gable".parse()?, "l-flat".parse()?, "u-pent".parse()?];
            let ds = generate_dataset(9, &mix, [0.0, 0.0, 300.0, 300.0], 7)?;
            let mut buf = Vec::new();
            write_citygml(&mut buf, &ds.gml_buildings()?, "EPSG:25833").expect("in-memory write");
            parse_citygml(Cursor::new(buf))?
        }
    };

    for r in &records {
        let wt = watertight_check(&r.mesh);
        println!(
            "{:<14} polygons {:>3}  triangles {:>3}  area {:>8.1} m2  volume {:>9.1} m3  anchor ({:.1}, {:.1})  {}",
            r.id,
            r.polygon_count,
            r.mesh.triangles.len(),
            r.mesh.area(),
            r.mesh.signed_volume(),
            r.anchor_point[0],
            r.anchor_point[1],
            if wt.is_watertight { "watertight" } else { "open" }
        );
    }
    println!(
        "{} parsed, {} skipped, {} non-building objects, {} non-planar polygons, srs {:?}",
        report.buildings_parsed,
        report.buildings_skipped.len(),
        report.non_building_skipped,
        report.nonplanar_polygons,
        report.srs_names
    );
    for s in &report.buildings_skipped {
        println!("  skipped {}: {}", s.id, s.reason);
    }
    Ok(())
}
