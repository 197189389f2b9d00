use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use super::commands::{self as cmd, StageOutput, SynthFormat};
use super::config::ConfigFile;
use super::manifest::{sha256_hex, FileDigest, PipelineManifest, StageRecord};
use crate::error::{Error, Result};
use crate::foldnet::Preset;
use crate::geogroup::CenterMethod;

#[derive(Debug, Parser)]
#[command(name = "urbanfold", version, about = "Building shape embeddings from CityGML")]
pub struct Cli {
    /// Append a provenance record for this stage to the given manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    /// Settings file (JSON object or key = value lines); flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "URBANFOLD_THREADS")]
    pub threads: Option<usize>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Errors only.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic buildings with known families.
    Synth(SynthArgs),
    /// Parse CityGML / OBJ into the building store.
    Ingest(IngestArgs),
    /// Sample and normalize point clouds.
    Sample(SampleArgs),
    /// Train the autoencoder.
    Train(TrainArgs),
    /// Encode point clouds to codewords.
    Encode(EncodeArgs),
    /// PCA + Ward clustering of embeddings.
    Cluster(ClusterArgs),
    /// Two-dimensional t-SNE layout of embeddings.
    Tsne(TsneArgs),
    /// Neighbourhood grouping within boundaries.
    Group(GroupArgs),
    /// Verify manifest digests and summarize the run.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    count: Option<usize>,
    /// Comma-separated families, e.g. rect-gable,l-flat-large.
    #[arg(long)]
    mix: Option<String>,
    /// x0,y0,x1,y1 in projected metres.
    #[arg(long, allow_hyphen_values = true)]
    bbox: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<SynthFormat>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// CityGML files, OBJ files or directories of them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Building store (buildings.jsonl).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train:test ratio such as 3:1.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    percentile_lo: Option<f64>,
    #[arg(long)]
    percentile_hi: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    clouds: PathBuf,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    codeword_dim: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Folding grid side.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    clouds: PathBuf,
    /// Output embedding store (.bemb).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// PCA components (capped at the embedding dimension).
    #[arg(long)]
    pca: Option<usize>,
    /// Cut the dendrogram at this merge distance.
    #[arg(long, conflicts_with = "k")]
    cut: Option<f64>,
    /// Cut the dendrogram into this many clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Buildings sampled per cluster for inspection.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ground-truth labels.csv; reports cluster purity.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TsneArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// CSV with building_id,x,y[,boundary_id].
    #[arg(long)]
    entities: PathBuf,
    #[arg(long)]
    tau: Option<f64>,
    /// Also sweep these tau values (default 0.01,0.02,0.03,0.04,0.05).
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    tau_sweep: Option<String>,
    /// GeoJSON polygons with a boundary_id property.
    #[arg(long, conflicts_with = "tiles")]
    boundaries: Option<PathBuf>,
    /// Square tiles of this side length in metres.
    #[arg(long)]
    tiles: Option<f64>,
    #[arg(long, value_enum)]
    center: Option<CenterMethod>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Where to write the report JSON.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Ingest(_) => "ingest",
            Command::Sample(_) => "sample",
            Command::Train(_) => "train",
            Command::Encode(_) => "encode",
            Command::Cluster(_) => "cluster",
            Command::Tsne(_) => "tsne",
            Command::Group(_) => "group",
            Command::Report(_) => "report",
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, argv: &[String]) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        // a second initialization (e.g. in tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let start = Instant::now();
    let out = match &cli.command {
        Command::Synth(a) => cmd::synth(
            &cmd::SynthOpts {
                count: a.count,
                mix: a.mix.clone(),
                bbox: a.bbox.clone(),
                seed: a.seed,
                format: a.format,
                out: a.out.clone(),
            },
            &cfg,
        )?,
        Command::Ingest(a) => cmd::ingest(
            &cmd::IngestOpts {
                inputs: a.inputs.clone(),
                out: a.out.clone(),
            },
            &cfg,
        )?,
        Command::Sample(a) => cmd::sample(
            &cmd::SampleOpts {
                input: a.input.clone(),
                points: a.points,
                seed: a.seed,
                split: a.split.clone(),
                preset: a.preset,
                percentile_lo: a.percentile_lo,
                percentile_hi: a.percentile_hi,
                out: a.out.clone(),
            },
            &cfg,
        )?,
        Command::Train(a) => cmd::train(
            &cmd::TrainOpts {
                clouds: a.clouds.clone(),
                preset: a.preset,
                epochs: a.epochs,
                lr: a.lr,
                batch: a.batch,
                codeword_dim: a.codeword_dim,
                k: a.k,
                grid: a.grid,
                seed: a.seed,
                checkpoint_every: a.checkpoint_every,
                resume: a.resume.clone(),
                out: a.out.clone(),
            },
            &cfg,
        )?,
        Command::Encode(a) => cmd::encode_store(
            &cmd::EncodeOpts {
                checkpoint: a.checkpoint.clone(),
                clouds: a.clouds.clone(),
                out: a.out.clone(),
            },
            &cfg,
        )?,
        Command::Cluster(a) => cmd::cluster(
            &cmd::ClusterOpts {
                embeddings: a.embeddings.clone(),
                pca: a.pca,
                cut: a.cut,
                k: a.k,
                sample: a.sample,
                seed: a.seed,
                labels: a.labels.clone(),
                out: a.out.clone(),
            },
            &cfg,
        )?,
        Command::Tsne(a) => cmd::tsne_cmd(
            &cmd::TsneOpts {
                embeddings: a.embeddings.clone(),
                perplexity: a.perplexity,
                iters: a.iters,
                seed: a.seed,
                out: a.out.clone(),
            },
            &cfg,
        )?,
        Command::Group(a) => cmd::group(
            &cmd::GroupOpts {
                embeddings: a.embeddings.clone(),
                entities: a.entities.clone(),
                tau: a.tau,
                tau_sweep: a.tau_sweep.clone(),
                boundaries: a.boundaries.clone(),
                tiles: a.tiles,
                center: a.center,
                out: a.out.clone(),
            },
            &cfg,
        )?,
        Command::Report(a) => {
            let path = cli
                .manifest
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("report needs --manifest".into()))?;
            cmd::report(&PipelineManifest::load(path)?, &a.out)?;
            return Ok(());
        }
    };
    if let Some(path) = &cli.manifest {
        record(path, cli.command.name(), argv, out, start.elapsed().as_secs_f64())?;
    }
    Ok(())
}

fn record(path: &std::path::Path, stage: &str, argv: &[String], out: StageOutput, wall: f64) -> Result<()> {
    let digests = |paths: &[PathBuf]| -> Result<Vec<FileDigest>> {
        paths.iter().filter(|p| p.is_file()).map(|p| FileDigest::of(p)).collect()
    };
    let rec = StageRecord {
        stage: stage.to_string(),
        argv: argv.to_vec(),
        config_sha256: sha256_hex(serde_json::to_string(&out.config)?.as_bytes()),
        config: out.config,
        seed: out.seed,
        inputs: digests(&out.inputs)?,
        outputs: digests(&out.outputs)?,
        counts: out.counts,
        wall_seconds: wall,
    };
    let mut m = PipelineManifest::load_or_new(path, &rec)?;
    m.append(rec);
    m.save(path)
}
