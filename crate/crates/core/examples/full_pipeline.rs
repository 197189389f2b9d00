//! Drives every CLI stage in-process, appending to one manifest, and
//! verifies the recorded digests.
//!
//! cargo run --release --example full_pipeline -- [work_dir]

use urbanfold::pipeline::{run, PipelineManifest};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "target/pipeline_example".into());
    let m = format!("{dir}/manifest.json");
    let _ = std::fs::remove_file(&m);
    let p = |s: &str| format!("{dir}/{s}");
    let stages: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--count".into(), "80".into(), "--out".into(), p("synth")],
        vec!["ingest".into(), p("synth/buildings.gml"), "--out".into(), p("ingest")],
        vec!["sample".into(), "--input".into(), p("ingest/buildings.jsonl"), "--preset".into(), "desk".into(), "--split".into(), "3:1".into(), "--out".into(), p("sample")],
        vec!["train".into(), "--clouds".into(), p("sample/train.bpcl"), "--preset".into(), "desk".into(), "--epochs".into(), "40".into(), "--out".into(), p("model")],
        vec!["encode".into(), "--checkpoint".into(), p("model/model.ckpt"), "--clouds".into(), p("sample/clouds.bpcl"), "--out".into(), p("embed/codewords.bemb")],
        vec!["cluster".into(), "--embeddings".into(), p("embed/codewords.bemb"), "--k".into(), "6".into(), "--labels".into(), p("synth/labels.csv"), "--out".into(), p("cluster")],
        vec!["tsne".into(), "--embeddings".into(), p("embed/codewords.bemb"), "--perplexity".into(), "10".into(), "--out".into(), p("tsne")],
        vec!["group".into(), "--embeddings".into(), p("embed/codewords.bemb"), "--entities".into(), p("sample/entities.csv"), "--tiles".into(), "1000".into(), "--tau-sweep".into(), "--out".into(), p("group")],
        vec!["report".into(), "--out".into(), p("report.json")],
    ];
    for args in stages {
        let argv = ["urbanfold".to_string(), "--manifest".into(), m.clone()].into_iter().chain(args.iter().cloned());
        let code = run(argv);
        if code != 0 {
            eprintln!("{} failed with exit code {code}", args[0]);
            std::process::exit(code);
        }
    }
    let manifest = PipelineManifest::load(m.as_ref()).expect("manifest written");
    println!("run {} with {} stages; digest problems: {}", manifest.run_id, manifest.stages.len(), manifest.verify().len());
}
