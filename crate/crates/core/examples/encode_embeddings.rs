//! Encodes point clouds with a (briefly trained) model and writes the
//! embedding store.

use rayon::prelude::*;
use urbanfold::dataset::{prepare_clouds, SampleConfig};
use urbanfold::foldnet::{encode, to_f32, train, Preset, TrainConfig};
use urbanfold::store::Embeddings;
use urbanfold::synth::generate_dataset;

fn main() -> urbanfold::Result<()> {
    let mix = ["rect-hip".parse()?, "l-flat".parse()?];
    let ds = generate_dataset(24, &mix, [0.0, 0.0, 500.0, 500.0], 5)?;
    let prepared = prepare_clouds(&ds.records, &SampleConfig { points: 64, seed: 5, ..Default::default() })?;
    let clouds: Vec<Vec<[f32; 3]>> = prepared.clouds.iter().map(|c| to_f32(&c.points)).collect();

    let model = train(&clouds, &TrainConfig { epochs: 20, ..TrainConfig::preset(Preset::Desk) })?;
    let codes: Vec<Vec<f32>> = clouds.par_iter().map(|c| encode(&model.params, c)).collect::<Result<_, _>>()?;

    let ids = prepared.clouds.iter().map(|c| c.source_id.clone()).collect();
    let dim = model.params.arch.codeword_dim;
    let store = Embeddings::new(ids, dim, codes.concat())?;
    let path = std::env::temp_dir().join("urbanfold_example.bemb");
    store.write(&path)?;

    let back = Embeddings::read(&path)?;
    println!("{} codewords of dimension {} in {}", back.len(), back.dim, path.display());
    for i in 0..3 {
        let row: Vec<String> = back.row(i).iter().take(6).map(|v| format!("{v:+.3}")).collect();
        println!("{}  [{} ...]", back.ids[i], row.join(" "));
    }
    Ok(())
}
