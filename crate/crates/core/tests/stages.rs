use std::fs;
use std::path::Path;

use serde_json::Value;
use urbanfold::citygml::{write_citygml, SurfaceKind};
use urbanfold::foldnet::{train, Checkpoint, Preset, TrainConfig};
use urbanfold::geogroup::make_tiles;
use urbanfold::geogroup::GeoEntity;
use urbanfold::pipeline::commands::{self as cmd, ClusterOpts, IngestOpts, SampleOpts, TrainOpts};
use urbanfold::pipeline::{manifest::FileDigest, ConfigFile};
use urbanfold::store::{read_buildings, read_clouds};
use urbanfold::synth::{generate_dataset, Family};

fn mix() -> Vec<Family> {
    ["rect-flat", "rect-gable", "l-pent", "u-flat"].iter().map(|s| s.parse().unwrap()).collect()
}

fn write_gml(path: &Path, count: usize, open_roof_on: Option<usize>) {
    let ds = generate_dataset(count, &mix(), [0.0, 0.0, 2000.0, 2000.0], 3).unwrap();
    let mut buildings = ds.gml_buildings().unwrap();
    if let Some(i) = open_roof_on {
        let b = &mut buildings[i];
        let roof = b.surfaces.iter().position(|(k, _)| *k == SurfaceKind::Roof).unwrap();
        b.surfaces.remove(roof);
    }
    let mut buf = Vec::new();
    write_citygml(&mut buf, &buildings, "EPSG:25833").unwrap();
    fs::write(path, buf).unwrap();
}

fn ingest(dir: &Path, gml: &Path, out: &str) -> Value {
    let o = IngestOpts { inputs: vec![gml.to_path_buf()], out: dir.join(out) };
    cmd::ingest(&o, &ConfigFile::default()).unwrap();
    serde_json::from_str(&fs::read_to_string(dir.join(out).join("parse_report.json")).unwrap()).unwrap()
}

#[test]
fn ingest_drops_open_shells_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_gml(&d.join("ten.gml"), 10, None);
    write_gml(&d.join("open.gml"), 10, Some(4));

    let clean = ingest(d, &d.join("ten.gml"), "a");
    assert_eq!(clean["ingested"], 10);
    assert_eq!(clean["dropped_non_watertight"].as_array().unwrap().len(), 0);

    let open = ingest(d, &d.join("open.gml"), "b");
    assert_eq!(open["ingested"], 9);
    assert_eq!(open["dropped_non_watertight"], serde_json::json!(["SYN_000004"]));

    ingest(d, &d.join("ten.gml"), "c");
    let store = |s: &str| FileDigest::of(&d.join(s).join("buildings.jsonl")).unwrap().sha256;
    assert_eq!(store("a"), store("c"));
}

#[test]
fn sample_keeps_the_percentile_band_and_splits() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_gml(&d.join("hundred.gml"), 100, None);
    ingest(d, &d.join("hundred.gml"), "i");
    let opts = SampleOpts {
        input: d.join("i/buildings.jsonl"),
        points: Some(48),
        seed: Some(4),
        split: Some("3:1".into()),
        out: d.join("s"),
        ..Default::default()
    };
    let out = cmd::sample(&opts, &ConfigFile::default()).unwrap();
    let kept = out.counts["kept"] as usize;
    // 1st and 99th percentiles of 100 values: only the extremes can fall outside
    assert!(kept >= 98, "{kept}");
    let train = read_clouds(&d.join("s/train.bpcl")).unwrap();
    let test = read_clouds(&d.join("s/test.bpcl")).unwrap();
    assert_eq!(train.len() + test.len(), kept);
    assert_eq!(train.len(), (kept * 3 + 2) / 4);

    // the same seed reproduces the split
    let again = SampleOpts { out: d.join("s2"), ..opts };
    cmd::sample(&again, &ConfigFile::default()).unwrap();
    assert_eq!(fs::read(d.join("s/split.json")).unwrap(), fs::read(d.join("s2/split.json")).unwrap());

    let entities = fs::read_to_string(d.join("s/entities.csv")).unwrap();
    assert_eq!(entities.lines().count(), kept + 1);
    assert_eq!(read_buildings(&d.join("i/buildings.jsonl")).unwrap().len(), 100);
}

#[test]
fn train_resume_matches_unbroken_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_gml(&d.join("b.gml"), 24, None);
    ingest(d, &d.join("b.gml"), "i");
    let sample = SampleOpts { input: d.join("i/buildings.jsonl"), points: Some(32), out: d.join("s"), ..Default::default() };
    cmd::sample(&sample, &ConfigFile::default()).unwrap();
    let base = TrainOpts {
        clouds: d.join("s/clouds.bpcl"),
        preset: Some(Preset::Desk),
        epochs: Some(6),
        out: d.join("full"),
        ..Default::default()
    };
    cmd::train(&base, &ConfigFile::default()).unwrap();
    cmd::train(&TrainOpts { epochs: Some(3), out: d.join("half"), ..base.clone() }, &ConfigFile::default()).unwrap();
    cmd::train(
        &TrainOpts { resume: Some(d.join("half/model.ckpt")), epochs: Some(6), out: d.join("resumed"), ..base.clone() },
        &ConfigFile::default(),
    )
    .unwrap();
    assert_eq!(fs::read(d.join("full/loss.csv")).unwrap(), fs::read(d.join("resumed/loss.csv")).unwrap());
    assert_eq!(fs::read(d.join("full/model.ckpt")).unwrap(), fs::read(d.join("resumed/model.ckpt")).unwrap());

    // the checkpoint's config echo reproduces the run through the library
    let ck = Checkpoint::load(&d.join("full/model.ckpt")).unwrap();
    assert_eq!(ck.config.preset, Preset::Desk);
    let clouds: Vec<Vec<[f32; 3]>> = read_clouds(&d.join("s/clouds.bpcl"))
        .unwrap()
        .iter()
        .map(|c| urbanfold::foldnet::to_f32(&c.points))
        .collect();
    let direct = train(&clouds, &TrainConfig { epochs: 6, ..TrainConfig::preset(Preset::Desk) }).unwrap();
    assert_eq!(direct.loss_curve, ck.loss_curve);
}

#[test]
fn cut_above_the_last_merge_gives_one_cluster() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let ids: Vec<String> = (0..30).map(|i| format!("b{i}")).collect();
    let values: Vec<f32> = (0..30 * 4).map(|i| ((i * 37 % 11) as f32) * 0.1 + (i % 4) as f32).collect();
    urbanfold::store::Embeddings::new(ids, 4, values).unwrap().write(&d.join("e.bemb")).unwrap();
    let opts = ClusterOpts { embeddings: d.join("e.bemb"), cut: Some(1e9), out: d.join("c"), ..Default::default() };
    let out = cmd::cluster(&opts, &ConfigFile::default()).unwrap();
    assert_eq!(out.counts["clusters"], 1.0);
    let both = ClusterOpts { k: Some(3), ..opts };
    assert!(cmd::cluster(&both, &ConfigFile::default()).is_err());
}

#[test]
fn one_kilometre_tiles_on_a_two_kilometre_box() {
    let entities: Vec<GeoEntity> = (0..50)
        .map(|i| GeoEntity {
            building_id: format!("b{i}"),
            location: [390_000.0 + (i * 397 % 2000) as f64, 5_810_000.0 + (i * 211 % 2000) as f64],
            embedding_row: i,
        })
        .collect();
    let tiles = make_tiles([390_000.0, 5_810_000.0, 392_000.0, 5_812_000.0], 1000.0, &entities).unwrap();
    assert!(tiles.len() <= 4, "{}", tiles.len());
    assert_eq!(tiles.iter().map(|t| t.members.len()).sum::<usize>(), 50);
}
