//! PCA reduction and Ward clustering of codewords, with a purity check
//! against the synthetic family labels.
//!
//! cargo run --release --example cluster_embeddings

use std::collections::BTreeMap;

use urbanfold::analysis::{pca_fit, purity, sample_cluster, ward_linkage};
use urbanfold::dataset::{prepare_clouds, SampleConfig};
use urbanfold::foldnet::{encode, to_f32, train, Preset, TrainConfig};
use urbanfold::synth::generate_dataset;

fn main() -> urbanfold::Result<()> {
    let mix = ["rect-flat-small".parse()?, "rect-gable-large".parse()?, "u-flat".parse()?];
    let ds = generate_dataset(90, &mix, [0.0, 0.0, 1500.0, 1500.0], 0)?;
    let prepared = prepare_clouds(&ds.records, &SampleConfig { points: 64, seed: 0, ..Default::default() })?;
    let clouds: Vec<Vec<[f32; 3]>> = prepared.clouds.iter().map(|c| to_f32(&c.points)).collect();
    let model = train(&clouds, &TrainConfig { epochs: 80, ..TrainConfig::preset(Preset::Desk) })?;

    let rows: Vec<Vec<f64>> = clouds
        .iter()
        .map(|c| Ok(encode(&model.params, c)?.into_iter().map(f64::from).collect()))
        .collect::<urbanfold::Result<_>>()?;
    let pca = pca_fit(&rows, 15.min(rows[0].len()))?;
    let total: f64 = pca.explained_variance.iter().sum();
    println!("PCA to {} components, leading variances {:.2e} {:.2e} (sum {total:.2e})",
        pca.dim(), pca.explained_variance[0], pca.explained_variance[1]);

    let dendro = ward_linkage(&pca.transform(&rows)?)?;
    for (d, k) in dendro.cluster_curve().iter().rev().take(5) {
        println!("cut at {d:.4} -> {k} clusters");
    }
    let labels = dendro.cut_to_clusters(3);

    let family: BTreeMap<&str, String> = ds.ids.iter().zip(&ds.specs)
        .map(|(id, s)| (id.as_str(), format!("{}-{}", s.footprint, s.roof)))
        .collect();
    let names: Vec<String> = prepared.clouds.iter().map(|c| family[c.source_id.as_str()].clone()).collect();
    let mut distinct = names.clone();
    distinct.sort();
    distinct.dedup();
    let classes: Vec<usize> = names.iter().map(|n| distinct.iter().position(|d| d == n).unwrap()).collect();
    println!("purity against families: {:.3}", purity(&labels, &classes));

    for c in 0..3 {
        let picks = sample_cluster(&labels, c, 5, 0)?;
        let shown: Vec<&str> = picks.iter().map(|&i| names[i].as_str()).collect();
        println!("cluster {c}: {shown:?}");
    }
    Ok(())
}
