use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use urbanfold::pipeline::PipelineManifest;
use urbanfold::store::{read_clouds, Embeddings};

fn urbanfold(dir: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_urbanfold"))
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

/// synth → ingest → sample → train → encode → cluster → tsne → group → report
/// on a small district, in relative paths under one work directory.
fn small_run(dir: &Path) {
    let m = ["--manifest", "manifest.json"];
    let steps: [&[&str]; 8] = [
        &["synth", "--count", "48", "--seed", "2", "--out", "synth"],
        &["ingest", "synth/buildings.gml", "--out", "ingest"],
        &["sample", "--input", "ingest/buildings.jsonl", "--preset", "desk", "--split", "3:1", "--out", "sample"],
        &["train", "--clouds", "sample/train.bpcl", "--preset", "desk", "--epochs", "4", "--out", "model"],
        &["encode", "--checkpoint", "model/model.ckpt", "--clouds", "sample/clouds.bpcl", "--out", "embed/e.bemb"],
        &["cluster", "--embeddings", "embed/e.bemb", "--k", "3", "--labels", "synth/labels.csv", "--out", "cluster"],
        &["tsne", "--embeddings", "embed/e.bemb", "--perplexity", "5", "--iters", "300", "--out", "tsne"],
        &["group", "--embeddings", "embed/e.bemb", "--entities", "sample/entities.csv", "--tiles", "600", "--tau-sweep", "--out", "group"],
    ];
    for s in steps {
        let args: Vec<&str> = m.iter().chain(s.iter()).copied().collect();
        assert_eq!(urbanfold(dir, &args), 0, "{s:?}");
    }
}

#[test]
fn pipeline_artifacts_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_run(d);

    let m = PipelineManifest::load(&d.join("manifest.json")).unwrap();
    let stages: Vec<&str> = m.stages.iter().map(|s| s.stage.as_str()).collect();
    assert_eq!(stages, ["synth", "ingest", "sample", "train", "encode", "cluster", "tsne", "group"]);
    assert!(m.run_id.starts_with("run-"));
    assert!(m.verify().is_empty());
    assert_eq!(m.stages[0].seed, Some(2));

    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("ingest/parse_report.json")).unwrap()).unwrap();
    assert_eq!(report["buildings_parsed"], 48);
    assert_eq!(report["ingested"], 48);

    let clouds = read_clouds(&d.join("sample/clouds.bpcl")).unwrap();
    let train = read_clouds(&d.join("sample/train.bpcl")).unwrap();
    let test = read_clouds(&d.join("sample/test.bpcl")).unwrap();
    assert_eq!(train.len() + test.len(), clouds.len());
    assert!(clouds.iter().all(|c| c.len() == 64));

    let emb = Embeddings::read(&d.join("embed/e.bemb")).unwrap();
    assert_eq!(emb.len(), clouds.len());
    assert_eq!(emb.dim, 16);

    let loss = fs::read_to_string(d.join("model/loss.csv")).unwrap();
    assert_eq!(loss.lines().next(), Some("epoch,mean_loss"));
    assert_eq!(loss.lines().count(), 5);

    let clusters = fs::read_to_string(d.join("cluster/clusters.csv")).unwrap();
    assert_eq!(clusters.lines().count(), emb.len() + 1);
    let linkage = fs::read_to_string(d.join("cluster/linkage.csv")).unwrap();
    assert_eq!(linkage.lines().next(), Some("cluster_a,cluster_b,distance,size"));
    assert_eq!(linkage.lines().count(), emb.len());

    let choro: Value = serde_json::from_str(&fs::read_to_string(d.join("group/choropleth.geojson")).unwrap()).unwrap();
    assert_eq!(choro["type"], "FeatureCollection");
    let feats = choro["features"].as_array().unwrap();
    assert!(!feats.is_empty());
    assert_eq!(feats[0]["geometry"]["type"], "Polygon");
    let sweep = fs::read_to_string(d.join("group/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next(), Some("boundary_id,tau,count,groups,k_ratio"));

    assert_eq!(urbanfold(d, &["--manifest", "manifest.json", "report", "--out", "report.json"]), 0);
    let rep: Value = serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["stages"].as_array().unwrap().len(), 8);

    // a modified artifact fails verification with exit code 2
    fs::write(d.join("cluster/clusters.csv"), "building_id,cluster\n").unwrap();
    assert_eq!(urbanfold(d, &["--manifest", "manifest.json", "report", "--out", "report.json"]), 2);
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        assert_eq!(urbanfold(d, &["synth", "--count", "20", "--seed", "9", "--out", "s"]), 0);
        assert_eq!(urbanfold(d, &["ingest", "s/buildings.gml", "--out", "i"]), 0);
        assert_eq!(urbanfold(d, &["sample", "--input", "i/buildings.jsonl", "--points", "32", "--out", "p"]), 0);
    }
    for f in ["s/buildings.gml", "s/labels.csv", "i/buildings.jsonl", "p/clouds.bpcl", "p/normalization.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("run.cfg"), "count = 7\nseed = 5\nmix = rect-hip,u-flat\n").unwrap();
    assert_eq!(urbanfold(d, &["--config", "run.cfg", "synth", "--out", "a"]), 0);
    assert_eq!(fs::read_to_string(d.join("a/labels.csv")).unwrap().lines().count(), 8);
    assert_eq!(urbanfold(d, &["--config", "run.cfg", "synth", "--count", "3", "--out", "b"]), 0);
    let labels = fs::read_to_string(d.join("b/labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 4);
    assert!(labels.contains(",rect,hip,") && labels.contains(",U,flat,"));
}

#[test]
fn obj_inputs_and_epoch_zero_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(urbanfold(d, &["synth", "--count", "12", "--format", "obj", "--out", "s"]), 0);
    assert_eq!(fs::read_dir(d.join("s/obj")).unwrap().count(), 12);
    assert_eq!(urbanfold(d, &["ingest", "s/obj", "--out", "i"]), 0);
    assert_eq!(urbanfold(d, &["sample", "--input", "i/buildings.jsonl", "--preset", "desk", "--out", "p"]), 0);
    assert_eq!(urbanfold(d, &["train", "--clouds", "p/clouds.bpcl", "--epochs", "0", "--out", "m"]), 0);
    assert!(d.join("m/model.ckpt").is_file() && d.join("m/model.ckpt.json").is_file());
    assert_eq!(urbanfold(d, &["encode", "--checkpoint", "m/model.ckpt", "--clouds", "p/clouds.bpcl", "--out", "e.bemb"]), 0);
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // usage errors
    assert_eq!(urbanfold(d, &["synth"]), 1);
    assert_eq!(urbanfold(d, &["synth", "--mix", "rect-dome", "--out", "x"]), 1);
    assert_eq!(urbanfold(d, &["synth", "--mix", "u-gable", "--out", "x"]), 1);
    // missing input file
    assert_eq!(urbanfold(d, &["ingest", "nope.gml", "--out", "x"]), 2);
    // malformed XML
    fs::write(d.join("bad.gml"), "<CityModel><cityObjectMember><bldg:Building").unwrap();
    assert_eq!(urbanfold(d, &["ingest", "bad.gml", "--out", "x"]), 2);
    // t-SNE perplexity too large for the data
    assert_eq!(urbanfold(d, &["synth", "--count", "20", "--out", "s"]), 0);
    assert_eq!(urbanfold(d, &["ingest", "s/buildings.gml", "--out", "i"]), 0);
    assert_eq!(urbanfold(d, &["sample", "--input", "i/buildings.jsonl", "--points", "32", "--out", "p"]), 0);
    assert_eq!(urbanfold(d, &["train", "--clouds", "p/clouds.bpcl", "--epochs", "1", "--out", "m"]), 0);
    assert_eq!(urbanfold(d, &["encode", "--checkpoint", "m/model.ckpt", "--clouds", "p/clouds.bpcl", "--out", "e.bemb"]), 0);
    assert_eq!(urbanfold(d, &["tsne", "--embeddings", "e.bemb", "--out", "t"]), 1);
    assert_eq!(urbanfold(d, &["group", "--embeddings", "e.bemb", "--entities", "i/entities.csv", "--tau", "0", "--out", "g"]), 1);
    // report without a manifest
    assert_eq!(urbanfold(d, &["report"]), 1);
}
