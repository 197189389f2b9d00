use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::checkpoint::Checkpoint;
use super::model::{knn_indices, loss_and_gradients, Neighborhoods};
use super::params::{Architecture, NetworkParams};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Reduced widths, 64-point clouds, 5×5 grid.
    Desk,
    /// Full widths, 2048-point clouds, 45×45 grid.
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::InvalidArgument(format!(
                "unknown preset {s:?} (desk or paper)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub preset: Preset,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub codeword_dim: usize,
    pub k_neighbors: usize,
    pub grid_side: usize,
    pub seed: u64,
    /// Save a checkpoint every this many epochs; 0 disables periodic saves.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::preset(Preset::Paper)
    }
}

impl TrainConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => TrainConfig {
                preset,
                epochs: 800,
                learning_rate: 1e-4,
                batch_size: 16,
                codeword_dim: 512,
                k_neighbors: 16,
                grid_side: 45,
                seed: 0,
                checkpoint_every: 50,
            },
            Preset::Desk => TrainConfig {
                preset,
                epochs: 200,
                learning_rate: 1e-3,
                batch_size: 8,
                codeword_dim: 16,
                k_neighbors: 8,
                grid_side: 5,
                seed: 0,
                checkpoint_every: 50,
            },
        }
    }

    /// Preset widths with this config's codeword, neighbor and grid sizes.
    pub fn architecture(&self) -> Architecture {
        let base = match self.preset {
            Preset::Paper => Architecture::paper(self.codeword_dim),
            Preset::Desk => Architecture::desk(self.codeword_dim),
        };
        Architecture {
            k_neighbors: self.k_neighbors,
            grid_side: self.grid_side,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} is not a non-negative number",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        self.architecture().validate()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams<f32>,
    pub adam: AdamState<f32>,
    /// Mean per-cloud loss of each epoch.
    pub loss_curve: Vec<f64>,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Where periodic and final checkpoints go.
    pub checkpoint: Option<&'a Path>,
    /// Continue from this state instead of a fresh initialization.
    pub resume: Option<Checkpoint>,
    pub on_epoch: Option<&'a dyn Fn(usize, f64)>,
}

pub fn to_f32(points: &[[f64; 3]]) -> Vec<[f32; 3]> {
    points.iter().map(|p| p.map(|v| v as f32)).collect()
}

pub fn train(clouds: &[Vec<[f32; 3]>], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(clouds, config, TrainOptions::default())
}

/// Mini-batch Adam on the mean chamfer loss. Epoch `e` visits the clouds in
/// an order drawn from a stream keyed by (seed, e), so a resumed run follows
/// the same trajectory as an uninterrupted one.
pub fn train_with(
    clouds: &[Vec<[f32; 3]>],
    config: &TrainConfig,
    opts: TrainOptions<'_>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if clouds.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let arch = config.architecture();
    let n_points = clouds[0].len();
    if clouds.iter().any(|c| c.len() != n_points) {
        return Err(Error::DimensionMismatch(
            "training clouds must share one point count".into(),
        ));
    }
    let neighborhoods: Vec<Neighborhoods> = clouds
        .iter()
        .map(|c| knn_indices(c, arch.k_neighbors))
        .collect::<Result<_>>()?;

    let (mut params, mut adam, mut curve, start) = match opts.resume {
        Some(ck) => {
            NetworkParams::<f32>::zeros(&arch).check_layout(&ck.params)?;
            if ck.params.arch != arch {
                return Err(Error::Checkpoint(format!(
                    "checkpoint architecture {:?} differs from {arch:?}",
                    ck.params.arch
                )));
            }
            (ck.params, ck.adam, ck.loss_curve, ck.epoch)
        }
        None => {
            let p = NetworkParams::<f32>::init(&arch, config.seed)?;
            let a = AdamState::new(&p);
            (p, a, Vec::new(), 0)
        }
    };

    let save = |params: &NetworkParams<f32>, adam: &AdamState<f32>, curve: &[f64], epoch| {
        opts.checkpoint.map_or(Ok(()), |path| {
            Checkpoint {
                params: params.clone(),
                adam: adam.clone(),
                epoch,
                config: config.clone(),
                loss_curve: curve.to_vec(),
            }
            .save(path)
        })
    };

    let mut order: Vec<usize> = (0..clouds.len()).collect();
    for epoch in start..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::indexed_stream(config.seed, "epoch", epoch as u64));
        let mut total = 0.0f64;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[[f32; 3]], &Neighborhoods)> = chunk
                .iter()
                .map(|&i| (clouds[i].as_slice(), &neighborhoods[i]))
                .collect();
            let (loss, grads) = loss_and_gradients(&params, &batch)?;
            adam_step(&mut adam, &mut params, &grads, config.learning_rate)?;
            total += loss as f64 * chunk.len() as f64;
        }
        let mean = total / clouds.len() as f64;
        curve.push(mean);
        log::debug!("epoch {} loss {mean:.6}", epoch + 1);
        if let Some(cb) = opts.on_epoch {
            cb(epoch + 1, mean);
        }
        let done = epoch + 1;
        if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done < config.epochs {
            save(&params, &adam, &curve, done)?;
        }
    }
    if config.epochs > start {
        save(&params, &adam, &curve, config.epochs)?;
    }
    Ok(TrainOutcome {
        params,
        adam,
        loss_curve: curve,
    })
}

/// `epoch,mean_loss` with 1-based epochs.
pub fn write_loss_csv<W: Write>(curve: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "mean_loss"])?;
    for (i, l) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{l:?}")])?;
    }
    w.flush().map_err(|e| Error::io("loss curve", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::RngExt;

    fn blob_cloud(n: usize, seed: u64) -> Vec<[f32; 3]> {
        let mut r = rng::stream(seed, "train-test");
        (0..n)
            .map(|_| {
                let u: f32 = r.random_range(-0.5..0.5);
                let v: f32 = r.random_range(-0.5..0.5);
                [u, v * 0.6, 0.3 * u * v]
            })
            .collect()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 100,
            batch_size: 4,
            codeword_dim: 8,
            grid_side: 4,
            seed: 5,
            checkpoint_every: 0,
            ..TrainConfig::preset(Preset::Desk)
        }
    }

    #[test]
    fn repeated_cloud_loss_halves() {
        let c = blob_cloud(32, 1);
        let data = vec![c; 10];
        let out = train(&data, &small_config()).unwrap();
        assert_eq!(out.loss_curve.len(), 100);
        assert!(out.loss_curve[99] < 0.5 * out.loss_curve[0], "{:?}", out.loss_curve);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let data = vec![blob_cloud(32, 1); 2];
        let cfg = TrainConfig {
            epochs: 0,
            ..small_config()
        };
        let out = train(&data, &cfg).unwrap();
        assert!(out.loss_curve.is_empty());
        assert_eq!(out.params, NetworkParams::init(&cfg.architecture(), cfg.seed).unwrap());
    }

    #[test]
    fn zero_learning_rate_keeps_loss() {
        let data = vec![blob_cloud(32, 1), blob_cloud(32, 2)];
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.0,
            batch_size: 2,
            ..small_config()
        };
        let out = train(&data, &cfg).unwrap();
        assert_eq!(out.loss_curve[0], out.loss_curve[2]);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let data: Vec<_> = (0..6).map(|i| blob_cloud(32, i)).collect();
        let dir = tempfile::tempdir().unwrap();
        let ck = dir.path().join("m.ckpt");
        let cfg = TrainConfig {
            epochs: 6,
            checkpoint_every: 3,
            ..small_config()
        };
        let full = train(&data, &cfg).unwrap();
        let half = TrainConfig { epochs: 3, ..cfg.clone() };
        train_with(&data, &half, TrainOptions { checkpoint: Some(&ck), ..Default::default() }).unwrap();
        let resumed = train_with(
            &data,
            &cfg,
            TrainOptions {
                resume: Some(Checkpoint::load(&ck).unwrap()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(resumed.loss_curve, full.loss_curve);
        assert_eq!(resumed.params, full.params);
    }

    #[test]
    fn loss_csv_layout() {
        let mut buf = Vec::new();
        write_loss_csv(&[0.5, 0.25], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,mean_loss\n1,0.5\n2,0.25\n");
    }
}
