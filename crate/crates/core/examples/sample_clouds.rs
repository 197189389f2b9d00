//! Surface sampling and shared-scale normalization of building meshes.

use urbanfold::dataset::{prepare_clouds, SampleConfig};
use urbanfold::mesh::centroid_radius;
use urbanfold::store::{read_clouds, write_clouds};
use urbanfold::synth::generate_dataset;

fn main() -> urbanfold::Result<()> {
    let mix = ["rect-flat-small".parse()?, "rect-gable-large".parse()?, "u-flat".parse()?];
    let ds = generate_dataset(60, &mix, [0.0, 0.0, 1000.0, 1000.0], 3)?;

    let config = SampleConfig { points: 256, seed: 3, ..Default::default() };
    let prepared = prepare_clouds(&ds.records, &config)?;
    let m = &prepared.manifest;
    println!(
        "radius band [{:.2}, {:.2}] m at percentiles {}-{}; kept {}, dropped {:?}",
        m.lo_radius, m.hi_radius, m.percentile_lo, m.percentile_hi, m.kept_count, prepared.dropped
    );
    for c in prepared.clouds.iter().take(5) {
        let (_, r) = centroid_radius(c)?;
        println!("{}: {} points, normalized radius {r:.3}", c.source_id, c.len());
    }

    let path = std::env::temp_dir().join("urbanfold_example.bpcl");
    write_clouds(&path, &prepared.clouds)?;
    let back = read_clouds(&path)?;
    println!("store round trip: {} clouds from {}", back.len(), path.display());
    Ok(())
}
