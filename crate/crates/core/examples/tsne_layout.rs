//! Exact t-SNE on three Gaussian blobs.

use rand_distr::{Distribution, Normal};
use urbanfold::analysis::{tsne, TsneConfig};
use urbanfold::rng;

fn main() -> urbanfold::Result<()> {
    let mut r = rng::stream(1, "example-blobs");
    let g = Normal::new(0.0, 1.0).unwrap();
    let mut points = Vec::new();
    for blob in 0..3 {
        for _ in 0..60 {
            let mut p: Vec<f64> = (0..8).map(|_| g.sample(&mut r)).collect();
            p[blob] += 20.0;
            points.push(p);
        }
    }
    let res = tsne(&points, &TsneConfig { perplexity: 15.0, iterations: 500, seed: 1 })?;
    println!(
        "KL initial {:.3}, after exaggeration {:.3}, final {:.3} (learning rate {})",
        res.kl_initial,
        res.kl_after_exaggeration.unwrap_or(f64::NAN),
        res.kl_final,
        res.learning_rate
    );
    for blob in 0..3 {
        let pts = &res.coords[blob * 60..(blob + 1) * 60];
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / 60.0;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / 60.0;
        println!("blob {blob}: centre ({cx:7.2}, {cy:7.2})");
    }
    Ok(())
}
