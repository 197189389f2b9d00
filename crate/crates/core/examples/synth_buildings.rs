//! Generates a small synthetic district and writes it as CityGML and OBJ.
//!
//! cargo run --example synth_buildings -- [out_dir]

use std::fs;
use std::path::PathBuf;

use urbanfold::citygml::{export_obj, write_citygml};
use urbanfold::synth::{generate_dataset, Family};

fn main() -> urbanfold::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/synth_example".into()));
    fs::create_dir_all(&out).map_err(|e| urbanfold::Error::io(&out, e))?;

    let mix: Vec<Family> = ["rect-gable", "rect-hip", "l-pent", "u-flat"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let ds = generate_dataset(12, &mix, [390_000.0, 5_810_000.0, 390_500.0, 5_810_500.0], 42)?;

    let mut gml = Vec::new();
    write_citygml(&mut gml, &ds.gml_buildings()?, "EPSG:25833").map_err(|e| urbanfold::Error::io(&out, e))?;
    let gml_path = out.join("buildings.gml");
    fs::write(&gml_path, gml).map_err(|e| urbanfold::Error::io(&gml_path, e))?;

    for (rec, spec) in ds.records.iter().zip(&ds.specs) {
        let p = out.join(format!("{}.obj", rec.id));
        fs::write(&p, export_obj(&rec.mesh)).map_err(|e| urbanfold::Error::io(&p, e))?;
        println!(
            "{}  {:<11} {:5.1} x {:5.1} m, eaves {:4.1} m, {} triangles",
            rec.id,
            format!("{}-{}", spec.footprint, spec.roof),
            spec.width,
            spec.depth,
            spec.eave_height,
            rec.mesh.triangles.len()
        );
    }
    let mut labels = Vec::new();
    ds.write_labels(&mut labels)?;
    let lp = out.join("labels.csv");
    fs::write(&lp, labels).map_err(|e| urbanfold::Error::io(&lp, e))?;
    println!("wrote {}", out.display());
    Ok(())
}
