use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::ConfigFile;
use crate::analysis::{
    pca_fit, purity, sample_cluster, tsne, ward_linkage, write_coords_csv, write_labels_csv, TsneConfig,
};
use crate::citygml::{export_obj, import_obj, parse_citygml_file, write_citygml, BuildingRecord, ParseReport};
use crate::dataset::{normalize_all, parse_split, sample_buildings, split_ids};
use crate::error::{Error, Result};
use crate::foldnet::{encode, to_f32, train_with, write_loss_csv, Checkpoint, Preset, TrainConfig, TrainOptions};
use crate::geogroup::{
    boundaries_from_column, boundaries_from_polygons, check_tau, choropleth, group_points, make_tiles,
    read_boundary_polygons, read_entities, run_boundaries, sweep, write_assignments, write_entities, write_summary,
    write_sweep, CenterMethod, GeoEntity, DEFAULT_SWEEP, DEFAULT_TAU,
};
use crate::mesh::{watertight_check, PointCloud};
use crate::store::{read_buildings, read_clouds, write_atomic, write_buildings, write_clouds, Embeddings};
use crate::synth::{generate_dataset, Family};

pub const DEFAULT_MIX: &str = "rect-flat,rect-gable,rect-hip,rect-pent,l-flat,l-pent,u-flat,u-pent";
pub const DEFAULT_BBOX: &str = "390000,5810000,392000,5812000";
pub const DEFAULT_SRS: &str = "EPSG:25833";

/// What a command did, for the manifest.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub counts: BTreeMap<String, f64>,
}

impl StageOutput {
    fn count(&mut self, key: &str, v: impl Into<f64>) {
        self.counts.insert(key.to_string(), v.into());
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write_text(path, &s)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn parse_bbox(s: &str) -> Result<[f64; 4]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("bbox {s:?} is not x0,y0,x1,y1")))?;
    match v.as_slice() {
        &[a, b, c, d] => Ok([a, b, c, d]),
        _ => Err(Error::InvalidArgument(format!("bbox {s:?} is not x0,y0,x1,y1"))),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad {what} {x:?}"))))
        .collect()
}

// ---------------------------------------------------------------- synth

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SynthFormat {
    Gml,
    Obj,
}

impl std::str::FromStr for SynthFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gml" => Ok(SynthFormat::Gml),
            "obj" => Ok(SynthFormat::Obj),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SynthOpts {
    pub count: Option<usize>,
    pub mix: Option<String>,
    pub bbox: Option<String>,
    pub seed: Option<u64>,
    pub format: Option<SynthFormat>,
    pub out: PathBuf,
}

pub fn synth(o: &SynthOpts, cfg: &ConfigFile) -> Result<StageOutput> {
    let count = cfg.pick(o.count, "count", 100usize)?;
    let mix_s = cfg.pick(o.mix.clone(), "mix", DEFAULT_MIX.to_string())?;
    let bbox_s = cfg.pick(o.bbox.clone(), "bbox", DEFAULT_BBOX.to_string())?;
    let seed = cfg.pick(o.seed, "seed", 0u64)?;
    let format = cfg.pick(o.format, "format", SynthFormat::Gml)?;
    let mix: Vec<Family> = parse_list(&mix_s, "family")?;
    let bbox = parse_bbox(&bbox_s)?;
    let ds = generate_dataset(count, &mix, bbox, seed)?;
    create_dir(&o.out)?;
    let mut out = StageOutput {
        config: json!({ "count": count, "mix": mix_s, "bbox": bbox, "seed": seed, "format": format }),
        seed: Some(seed),
        ..Default::default()
    };
    match format {
        SynthFormat::Gml => {
            let path = o.out.join("buildings.gml");
            let mut buf = Vec::new();
            write_citygml(&mut buf, &ds.gml_buildings()?, DEFAULT_SRS).map_err(|e| Error::io(&path, e))?;
            write_atomic(&path, &buf)?;
            out.outputs.push(path);
        }
        SynthFormat::Obj => {
            let dir = o.out.join("obj");
            create_dir(&dir)?;
            for r in &ds.records {
                let path = dir.join(format!("{}.obj", r.id));
                write_text(&path, &export_obj(&r.mesh))?;
                out.outputs.push(path);
            }
        }
    }
    let labels = o.out.join("labels.csv");
    write_atomic(&labels, &csv_bytes(|b| ds.write_labels(b))?)?;
    out.outputs.push(labels);
    out.count("buildings", count as f64);
    Ok(out)
}

// ---------------------------------------------------------------- ingest

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IngestReport {
    #[serde(flatten)]
    pub parse: ParseReport,
    pub ingested: usize,
    pub dropped_non_watertight: Vec<String>,
    pub duplicate_ids: Vec<String>,
    pub obj_failures: Vec<(String, String)>,
}

#[derive(Clone, Debug, Default)]
pub struct IngestOpts {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
}

fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.is_file())
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    files.retain(|f| matches!(ext(f).as_str(), "gml" | "xml" | "obj"));
    if files.is_empty() {
        return Err(Error::InvalidArgument("no .gml, .xml or .obj inputs".into()));
    }
    Ok(files)
}

fn ext(p: &Path) -> String {
    p.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

fn obj_record(path: &Path) -> Result<BuildingRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut mesh = import_obj(&text)?;
    mesh.cleanup();
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("building").to_string();
    let anchor_point = mesh.footprint_centroid().ok_or(Error::ZeroArea)?;
    Ok(BuildingRecord {
        id,
        roof_type: None,
        function: None,
        measured_height: None,
        anchor_point,
        polygon_count: mesh.triangles.len(),
        mesh,
        srs_name: None,
    })
}

pub fn ingest(o: &IngestOpts, _cfg: &ConfigFile) -> Result<StageOutput> {
    let files = expand_inputs(&o.inputs)?;
    type Parsed = (Vec<BuildingRecord>, ParseReport, Vec<(String, String)>);
    let parsed: Vec<Result<Parsed>> = files
        .par_iter()
        .map(|f| {
            if ext(f) == "obj" {
                let name = f.display().to_string();
                Ok(match obj_record(f) {
                    Ok(r) => (vec![r], ParseReport { buildings_parsed: 1, ..Default::default() }, vec![]),
                    Err(e) => (vec![], ParseReport::default(), vec![(name, e.to_string())]),
                })
            } else {
                let (r, p) = parse_citygml_file(f)?;
                Ok((r, p, vec![]))
            }
        })
        .collect();
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for p in parsed {
        let (recs, rep, fails) = p?;
        report.parse.merge(rep);
        report.obj_failures.extend(fails);
        for r in recs {
            if !seen.insert(r.id.clone()) {
                log::warn!("duplicate building id {} ignored", r.id);
                report.duplicate_ids.push(r.id);
                continue;
            }
            records.push(r);
        }
    }
    let tight: Vec<bool> = records.par_iter().map(|r| watertight_check(&r.mesh).is_watertight).collect();
    let mut kept = Vec::with_capacity(records.len());
    for (r, t) in records.into_iter().zip(tight) {
        if t {
            kept.push(r);
        } else {
            report.dropped_non_watertight.push(r.id);
        }
    }
    report.ingested = kept.len();
    log::info!(
        "ingested {} buildings, dropped {} non-watertight, skipped {}",
        kept.len(),
        report.dropped_non_watertight.len(),
        report.parse.buildings_skipped.len()
    );
    create_dir(&o.out)?;
    let store = o.out.join("buildings.jsonl");
    write_buildings(&store, &kept)?;
    let rep_path = o.out.join("parse_report.json");
    write_json(&rep_path, &report)?;
    let entities: Vec<(GeoEntity, Option<String>)> = kept
        .iter()
        .enumerate()
        .map(|(i, r)| (GeoEntity { building_id: r.id.clone(), location: r.anchor_point, embedding_row: i }, None))
        .collect();
    let ent_path = o.out.join("entities.csv");
    write_atomic(&ent_path, &csv_bytes(|b| write_entities(b, &entities))?)?;
    let mut out = StageOutput {
        config: json!({ "inputs": files }),
        inputs: files,
        outputs: vec![store, rep_path, ent_path],
        ..Default::default()
    };
    out.count("ingested", kept.len() as f64);
    out.count("dropped_non_watertight", report.dropped_non_watertight.len() as f64);
    out.count("skipped", report.parse.buildings_skipped.len() as f64);
    out.count("non_building_skipped", report.parse.non_building_skipped as f64);
    Ok(out)
}

// ---------------------------------------------------------------- sample

#[derive(Clone, Debug, Default)]
pub struct SampleOpts {
    pub input: PathBuf,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub split: Option<String>,
    pub preset: Option<Preset>,
    pub percentile_lo: Option<f64>,
    pub percentile_hi: Option<f64>,
    pub out: PathBuf,
}

pub fn default_points(preset: Preset) -> usize {
    match preset {
        Preset::Desk => 64,
        Preset::Paper => 2048,
    }
}

pub fn sample(o: &SampleOpts, cfg: &ConfigFile) -> Result<StageOutput> {
    let preset = cfg.pick(o.preset, "preset", Preset::Paper)?;
    let points = cfg.pick(o.points, "points", default_points(preset))?;
    let seed = cfg.pick(o.seed, "seed", 0u64)?;
    let lo = cfg.pick(o.percentile_lo, "percentile-lo", 1.0f64)?;
    let hi = cfg.pick(o.percentile_hi, "percentile-hi", 99.0f64)?;
    let split = cfg.pick_opt(o.split.clone(), "split")?;
    let records = read_buildings(&o.input)?;
    if records.is_empty() {
        return Err(Error::Empty("building store"));
    }
    let raw = sample_buildings(&records, points, seed)?;
    let prepared = normalize_all(raw, lo, hi)?;
    create_dir(&o.out)?;
    let clouds_path = o.out.join("clouds.bpcl");
    write_clouds(&clouds_path, &prepared.clouds)?;
    let norm_path = o.out.join("normalization.json");
    write_json(&norm_path, &json!({ "manifest": prepared.manifest, "dropped": prepared.dropped }))?;
    let mut out = StageOutput {
        config: json!({ "points": points, "seed": seed, "percentile_lo": lo, "percentile_hi": hi,
                        "split": split, "preset": preset }),
        seed: Some(seed),
        inputs: vec![o.input.clone()],
        outputs: vec![clouds_path.clone(), crate::store::ids_path(&clouds_path), norm_path],
        ..Default::default()
    };
    let kept: HashSet<&str> = prepared.clouds.iter().map(|c| c.source_id.as_str()).collect();
    let entities: Vec<(GeoEntity, Option<String>)> = records
        .iter()
        .filter(|r| kept.contains(r.id.as_str()))
        .enumerate()
        .map(|(i, r)| (GeoEntity { building_id: r.id.clone(), location: r.anchor_point, embedding_row: i }, None))
        .collect();
    let ent_path = o.out.join("entities.csv");
    write_atomic(&ent_path, &csv_bytes(|b| write_entities(b, &entities))?)?;
    out.outputs.push(ent_path);
    out.count("kept", prepared.clouds.len() as f64);
    out.count("dropped", prepared.dropped.len() as f64);
    out.count("global_scale", prepared.manifest.global_scale);
    if let Some(s) = split {
        let (a, b) = parse_split(&s)?;
        let ids: Vec<String> = prepared.clouds.iter().map(|c| c.source_id.clone()).collect();
        let (train, test) = split_ids(&ids, a, b, seed)?;
        let train_set: HashSet<&String> = train.iter().collect();
        let (tr, te): (Vec<PointCloud>, Vec<PointCloud>) =
            prepared.clouds.into_iter().partition(|c| train_set.contains(&c.source_id));
        for (name, part) in [("train.bpcl", &tr), ("test.bpcl", &te)] {
            let p = o.out.join(name);
            write_clouds(&p, part)?;
            out.outputs.push(crate::store::ids_path(&p));
            out.outputs.push(p);
        }
        let split_path = o.out.join("split.json");
        write_json(&split_path, &json!({ "train": train, "test": test }))?;
        out.outputs.push(split_path);
        out.count("train", tr.len() as f64);
        out.count("test", te.len() as f64);
    }
    Ok(out)
}

// ---------------------------------------------------------------- train

#[derive(Clone, Debug, Default)]
pub struct TrainOpts {
    pub clouds: PathBuf,
    pub preset: Option<Preset>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub codeword_dim: Option<usize>,
    pub k: Option<usize>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub checkpoint_every: Option<usize>,
    pub resume: Option<PathBuf>,
    pub out: PathBuf,
}

fn load_f32_clouds(path: &Path) -> Result<(Vec<String>, Vec<Vec<[f32; 3]>>)> {
    let clouds = read_clouds(path)?;
    Ok(clouds.into_iter().map(|c| (c.source_id, to_f32(&c.points))).unzip())
}

pub fn train(o: &TrainOpts, cfg: &ConfigFile) -> Result<StageOutput> {
    let resume = o.resume.as_deref().map(Checkpoint::load).transpose()?;
    let config = match &resume {
        Some(ck) => TrainConfig {
            epochs: cfg.pick(o.epochs, "epochs", ck.config.epochs)?,
            checkpoint_every: cfg.pick(o.checkpoint_every, "checkpoint-every", ck.config.checkpoint_every)?,
            ..ck.config.clone()
        },
        None => {
            let preset = cfg.pick(o.preset, "preset", Preset::Desk)?;
            let base = TrainConfig::preset(preset);
            TrainConfig {
                preset,
                epochs: cfg.pick(o.epochs, "epochs", base.epochs)?,
                learning_rate: cfg.pick(o.lr, "lr", base.learning_rate)?,
                batch_size: cfg.pick(o.batch, "batch", base.batch_size)?,
                codeword_dim: cfg.pick(o.codeword_dim, "codeword-dim", base.codeword_dim)?,
                k_neighbors: cfg.pick(o.k, "k", base.k_neighbors)?,
                grid_side: cfg.pick(o.grid, "grid", base.grid_side)?,
                seed: cfg.pick(o.seed, "seed", base.seed)?,
                checkpoint_every: cfg.pick(o.checkpoint_every, "checkpoint-every", base.checkpoint_every)?,
            }
        }
    };
    config.validate()?;
    let (_, clouds) = load_f32_clouds(&o.clouds)?;
    create_dir(&o.out)?;
    let ckpt = o.out.join("model.ckpt");
    let start = resume.as_ref().map_or(0, |c| c.epoch);
    let report = |epoch: usize, loss: f64| {
        if epoch == 1 || epoch % 10 == 0 || epoch == config.epochs {
            log::info!("epoch {epoch}/{} loss {loss:.6}", config.epochs);
        }
    };
    let outcome = train_with(
        &clouds,
        &config,
        TrainOptions {
            checkpoint: Some(&ckpt),
            resume,
            on_epoch: Some(&report),
        },
    )?;
    if config.epochs <= start {
        // nothing trained: still leave a checkpoint of the current state
        Checkpoint {
            params: outcome.params.clone(),
            adam: outcome.adam.clone(),
            epoch: start,
            config: config.clone(),
            loss_curve: outcome.loss_curve.clone(),
        }
        .save(&ckpt)?;
    }
    let loss_path = o.out.join("loss.csv");
    write_atomic(&loss_path, &csv_bytes(|b| write_loss_csv(&outcome.loss_curve, b))?)?;
    let mut inputs = vec![o.clouds.clone()];
    inputs.extend(o.resume.clone());
    let mut out = StageOutput {
        config: serde_json::to_value(&config)?,
        seed: Some(config.seed),
        inputs,
        outputs: vec![ckpt.clone(), crate::foldnet::checkpoint::manifest_path(&ckpt), loss_path],
        ..Default::default()
    };
    out.count("clouds", clouds.len() as f64);
    out.count("epochs", config.epochs as f64);
    if let (Some(first), Some(last)) = (outcome.loss_curve.first(), outcome.loss_curve.last()) {
        out.count("first_loss", *first);
        out.count("final_loss", *last);
    }
    Ok(out)
}

// ---------------------------------------------------------------- encode

#[derive(Clone, Debug, Default)]
pub struct EncodeOpts {
    pub checkpoint: PathBuf,
    pub clouds: PathBuf,
    pub out: PathBuf,
}

pub fn encode_store(o: &EncodeOpts, _cfg: &ConfigFile) -> Result<StageOutput> {
    let ck = Checkpoint::load(&o.checkpoint)?;
    let (ids, clouds) = load_f32_clouds(&o.clouds)?;
    let codes: Vec<Vec<f32>> = clouds.par_iter().map(|c| encode(&ck.params, c)).collect::<Result<_>>()?;
    let dim = ck.params.arch.codeword_dim;
    let emb = Embeddings::new(ids, dim, codes.concat())?;
    if let Some(parent) = o.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    emb.write(&o.out)?;
    let mut out = StageOutput {
        config: json!({ "checkpoint": o.checkpoint, "dim": dim }),
        inputs: vec![o.checkpoint.clone(), o.clouds.clone()],
        outputs: vec![o.out.clone(), crate::store::ids_path(&o.out)],
        ..Default::default()
    };
    out.count("rows", emb.len() as f64);
    out.count("dim", dim as f64);
    Ok(out)
}

// ---------------------------------------------------------------- cluster

#[derive(Clone, Debug, Default)]
pub struct ClusterOpts {
    pub embeddings: PathBuf,
    pub pca: Option<usize>,
    pub cut: Option<f64>,
    pub k: Option<usize>,
    pub sample: Option<usize>,
    pub seed: Option<u64>,
    pub labels: Option<PathBuf>,
    pub out: PathBuf,
}

/// `building_id → footprint-roof` from a synthetic labels CSV.
pub fn read_family_labels(path: &Path) -> Result<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let r = rec?;
        let (Some(id), Some(fp), Some(roof)) = (r.get(0), r.get(1), r.get(2)) else {
            return Err(Error::Format(format!("{}: short row", path.display())));
        };
        out.insert(id.to_string(), format!("{fp}-{roof}"));
    }
    Ok(out)
}

pub fn cluster(o: &ClusterOpts, cfg: &ConfigFile) -> Result<StageOutput> {
    let emb = Embeddings::read(&o.embeddings)?;
    if emb.len() < 2 {
        return Err(Error::InvalidArgument("clustering needs at least 2 embeddings".into()));
    }
    let q = cfg.pick(o.pca, "pca", 15usize)?.min(emb.dim).min(emb.len());
    let cut = cfg.pick_opt(o.cut, "cut")?;
    let k = cfg.pick_opt(o.k, "k")?;
    let per_cluster = cfg.pick(o.sample, "sample", 12usize)?;
    let seed = cfg.pick(o.seed, "seed", 0u64)?;
    let rows = emb.rows_f64();
    let model = pca_fit(&rows, q)?;
    let reduced = model.transform(&rows)?;
    let dendro = ward_linkage(&reduced)?;
    let labels = match (cut, k) {
        (Some(d), None) => crate::analysis::cut_dendrogram(&dendro, d)?,
        (None, Some(k)) => dendro.cut_to_clusters(k),
        _ => return Err(Error::InvalidArgument("give exactly one of --cut or --k".into())),
    };
    let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
    create_dir(&o.out)?;
    let pca_path = o.out.join("pca.json");
    write_json(&pca_path, &model)?;
    let link_path = o.out.join("linkage.csv");
    write_atomic(&link_path, &csv_bytes(|b| dendro.write_csv(b))?)?;
    let lab_path = o.out.join("clusters.csv");
    write_atomic(&lab_path, &csv_bytes(|b| write_labels_csv(b, &emb.ids, &labels))?)?;
    let curve_path = o.out.join("cluster_curve.csv");
    let mut curve = String::from("distance,clusters\n");
    for (d, c) in dendro.cluster_curve() {
        curve.push_str(&format!("{d:?},{c}\n"));
    }
    write_text(&curve_path, &curve)?;
    let samples: BTreeMap<usize, Vec<&str>> = (0..n_clusters)
        .map(|c| {
            let picked = sample_cluster(&labels, c, per_cluster, seed)?;
            Ok((c, picked.into_iter().map(|i| emb.ids[i].as_str()).collect()))
        })
        .collect::<Result<_>>()?;
    let samples_path = o.out.join("cluster_samples.json");
    write_json(&samples_path, &samples)?;
    let mut out = StageOutput {
        config: json!({ "pca": q, "cut": cut, "k": k, "sample": per_cluster, "seed": seed }),
        seed: Some(seed),
        inputs: vec![o.embeddings.clone()],
        outputs: vec![pca_path, link_path, lab_path, curve_path, samples_path],
        ..Default::default()
    };
    out.count("clusters", n_clusters as f64);
    out.count("explained_variance", model.explained_variance.iter().sum::<f64>());
    if let Some(lp) = &o.labels {
        let fam = read_family_labels(lp)?;
        let names: Vec<&str> = emb.ids.iter().map(|id| fam.get(id).map_or("?", String::as_str)).collect();
        let mut classes_of: HashMap<&str, usize> = HashMap::new();
        let classes: Vec<usize> = names
            .iter()
            .map(|n| {
                let next = classes_of.len();
                *classes_of.entry(n).or_insert(next)
            })
            .collect();
        let p = purity(&labels, &classes);
        log::info!("purity against {}: {p:.3}", lp.display());
        out.count("purity", p);
        out.inputs.push(lp.clone());
    }
    Ok(out)
}

// ---------------------------------------------------------------- tsne

#[derive(Clone, Debug, Default)]
pub struct TsneOpts {
    pub embeddings: PathBuf,
    pub perplexity: Option<f64>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

pub fn tsne_cmd(o: &TsneOpts, cfg: &ConfigFile) -> Result<StageOutput> {
    let emb = Embeddings::read(&o.embeddings)?;
    let config = TsneConfig {
        perplexity: cfg.pick(o.perplexity, "perplexity", 80.0f64)?,
        iterations: cfg.pick(o.iters, "iters", 1000usize)?,
        seed: cfg.pick(o.seed, "seed", 0u64)?,
    };
    let res = tsne(&emb.rows_f64(), &config)?;
    create_dir(&o.out)?;
    let csv_path = o.out.join("tsne.csv");
    write_atomic(&csv_path, &csv_bytes(|b| write_coords_csv(b, &emb.ids, &res.coords))?)?;
    let rep_path = o.out.join("tsne_report.json");
    write_json(
        &rep_path,
        &json!({ "kl_initial": res.kl_initial, "kl_after_exaggeration": res.kl_after_exaggeration,
                 "kl_final": res.kl_final, "learning_rate": res.learning_rate }),
    )?;
    let mut out = StageOutput {
        config: serde_json::to_value(&config)?,
        seed: Some(config.seed),
        inputs: vec![o.embeddings.clone()],
        outputs: vec![csv_path, rep_path],
        ..Default::default()
    };
    out.count("kl_final", res.kl_final);
    Ok(out)
}

// ---------------------------------------------------------------- group

#[derive(Clone, Debug, Default)]
pub struct GroupOpts {
    pub embeddings: PathBuf,
    pub entities: PathBuf,
    pub tau: Option<f64>,
    /// Comma-separated tau values; empty string selects the default sweep.
    pub tau_sweep: Option<String>,
    pub boundaries: Option<PathBuf>,
    pub tiles: Option<f64>,
    pub center: Option<CenterMethod>,
    pub out: PathBuf,
}

pub fn group(o: &GroupOpts, cfg: &ConfigFile) -> Result<StageOutput> {
    let tau = cfg.pick(o.tau, "tau", DEFAULT_TAU)?;
    check_tau(tau)?;
    let sweep_list: Option<Vec<f64>> = match cfg.pick_opt(o.tau_sweep.clone(), "tau-sweep")? {
        None => None,
        Some(s) if s.trim().is_empty() => Some(DEFAULT_SWEEP.to_vec()),
        Some(s) => Some(parse_list(&s, "tau")?),
    };
    for &t in sweep_list.iter().flatten() {
        check_tau(t)?;
    }
    let center = match (o.center, cfg.get("center")) {
        (Some(c), _) => c,
        (None, Some(s)) => <CenterMethod as clap::ValueEnum>::from_str(s, true)
            .map_err(|_| Error::InvalidArgument(format!("unknown center method {s:?}")))?,
        (None, None) => CenterMethod::Geometric,
    };
    let tiles = cfg.pick_opt(o.tiles, "tiles")?;
    let emb = Embeddings::read(&o.embeddings)?;
    let file = fs::File::open(&o.entities).map_err(|e| Error::io(&o.entities, e))?;
    let rows = read_entities(file, &emb)?;
    let entities: Vec<GeoEntity> = rows.iter().map(|(e, _)| e.clone()).collect();
    let mut inputs = vec![o.embeddings.clone(), o.entities.clone()];
    let boundaries = match (&o.boundaries, tiles) {
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("--boundaries and --tiles are exclusive".into())),
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            inputs.push(path.clone());
            boundaries_from_polygons(&read_boundary_polygons(&text)?, &entities)
        }
        (None, Some(size)) => {
            if entities.is_empty() {
                return Err(Error::Empty("entity table"));
            }
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for e in &entities {
                for k in 0..2 {
                    lo[k] = lo[k].min(e.location[k]);
                    hi[k] = hi[k].max(e.location[k]);
                }
            }
            make_tiles([lo[0], lo[1], hi[0], hi[1]], size, &entities)?
        }
        (None, None) => {
            let b = boundaries_from_column(&rows);
            if b.is_empty() {
                return Err(Error::InvalidArgument(
                    "no boundaries: pass --boundaries, --tiles, or fill the boundary_id column".into(),
                ));
            }
            b
        }
    };
    let run = run_boundaries(&boundaries, &emb, tau, center)?;
    create_dir(&o.out)?;
    let assign = o.out.join("assignments.csv");
    write_atomic(&assign, &csv_bytes(|b| write_assignments(b, &run))?)?;
    let summary = o.out.join("summary.csv");
    write_atomic(&summary, &csv_bytes(|b| write_summary(b, &run))?)?;
    let choro = o.out.join("choropleth.geojson");
    write_json(&choro, &choropleth(&boundaries, &run))?;
    let points = o.out.join("groups.geojson");
    write_json(&points, &group_points(&boundaries, &run))?;
    let mut out = StageOutput {
        config: json!({ "tau": tau, "tau_sweep": sweep_list, "tiles": tiles,
                        "boundaries": o.boundaries, "center": center }),
        inputs,
        outputs: vec![assign, summary, choro, points],
        ..Default::default()
    };
    if let Some(list) = &sweep_list {
        let rows = sweep(&boundaries, &emb, list, center)?;
        let p = o.out.join("sweep.csv");
        write_atomic(&p, &csv_bytes(|b| write_sweep(b, &rows))?)?;
        out.outputs.push(p);
    }
    out.count("boundaries", run.summary.len() as f64);
    out.count("skipped_boundaries", run.skipped.len() as f64);
    out.count("buildings", run.summary.iter().map(|s| s.count).sum::<usize>() as f64);
    out.count("groups", run.summary.iter().map(|s| s.groups).sum::<usize>() as f64);
    Ok(out)
}

// ---------------------------------------------------------------- report

pub fn report(manifest: &super::manifest::PipelineManifest, out_path: &Path) -> Result<StageOutput> {
    let problems = manifest.verify();
    let stages: Vec<Value> = manifest
        .stages
        .iter()
        .map(|s| {
            json!({ "stage": s.stage, "outputs": s.outputs.len(), "counts": s.counts,
                    "wall_seconds": s.wall_seconds })
        })
        .collect();
    let doc = json!({
        "run_id": manifest.run_id,
        "tool_version": manifest.tool_version,
        "stages": stages,
        "digest_problems": problems.iter().map(|(p, why)| json!({ "path": p, "problem": why })).collect::<Vec<_>>(),
    });
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(out_path, &doc)?;
    for s in &manifest.stages {
        let counts: Vec<String> = s.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<8} {:>8.2}s  {}", s.stage, s.wall_seconds, counts.join(" "));
    }
    if !problems.is_empty() {
        for (p, why) in &problems {
            log::error!("{}: {why}", p.display());
        }
        return Err(Error::Format(format!("{} recorded outputs fail verification", problems.len())));
    }
    let mut out = StageOutput {
        config: json!({ "out": out_path }),
        outputs: vec![out_path.to_path_buf()],
        ..Default::default()
    };
    out.count("stages", manifest.stages.len() as f64);
    Ok(out)
}
