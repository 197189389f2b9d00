//! Trains the desk-sized folding autoencoder, checkpoints halfway and
//! resumes, then compares reconstructions.
//!
//! cargo run --release --example train_autoencoder

use urbanfold::dataset::{prepare_clouds, SampleConfig};
use urbanfold::foldnet::{chamfer, reconstruct, to_f32, train, train_with, Checkpoint, Preset, TrainConfig, TrainOptions};
use urbanfold::synth::{generate_dataset, Family};

fn main() -> urbanfold::Result<()> {
    let mix: Vec<Family> = ["rect-flat", "rect-gable", "l-pent", "u-flat"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let ds = generate_dataset(40, &mix, [0.0, 0.0, 800.0, 800.0], 1)?;
    let prepared = prepare_clouds(&ds.records, &SampleConfig { points: 64, seed: 1, ..Default::default() })?;
    let clouds: Vec<Vec<[f32; 3]>> = prepared.clouds.iter().map(|c| to_f32(&c.points)).collect();

    let config = TrainConfig { epochs: 60, ..TrainConfig::preset(Preset::Desk) };
    let dir = std::env::temp_dir().join("urbanfold_train_example");
    std::fs::create_dir_all(&dir).map_err(|e| urbanfold::Error::io(&dir, e))?;
    let ckpt = dir.join("model.ckpt");

    let half = TrainConfig { epochs: 30, ..config.clone() };
    let progress = |epoch: usize, loss: f64| {
        if epoch % 10 == 0 {
            println!("epoch {epoch:>3}  loss {loss:.5}");
        }
    };
    train_with(&clouds, &half, TrainOptions { checkpoint: Some(&ckpt), on_epoch: Some(&progress), ..Default::default() })?;
    let resumed = train_with(
        &clouds,
        &config,
        TrainOptions { resume: Some(Checkpoint::load(&ckpt)?), on_epoch: Some(&progress), ..Default::default() },
    )?;
    let straight = train(&clouds, &config)?;
    println!(
        "resumed run matches an unbroken run: {}",
        resumed.loss_curve == straight.loss_curve
    );

    for (c, id) in clouds.iter().zip(&prepared.clouds).take(4) {
        let rec = reconstruct(&straight.params, c)?;
        println!("{}: chamfer to reconstruction {:.4}", id.source_id, chamfer(c, &rec)?);
    }
    Ok(())
}
