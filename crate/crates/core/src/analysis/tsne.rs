//! Exact t-SNE: full O(n²) affinities, no tree approximation.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const MOMENTUM_SWITCH: usize = 250;
const ENTROPY_TOL: f64 = 1e-5;
const SEARCH_STEPS: usize = 50;
const INIT_SIGMA: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 80.0,
            iterations: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    pub coords: Vec<[f64; 2]>,
    /// KL(P‖Q) of the initial layout.
    pub kl_initial: f64,
    /// KL(P‖Q) when early exaggeration ends (None if it never ran to completion).
    pub kl_after_exaggeration: Option<f64>,
    pub kl_final: f64,
    pub learning_rate: f64,
}

fn squared_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Row `i` of the conditional affinities p(j|i) at precision `beta`,
/// together with the row's Shannon entropy (nats).
fn conditional_row(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let n = out.len();
    // shift by the smallest off-diagonal distance for stability
    let dmin = (0..n).filter(|&j| j != i).map(|j| dist[j]).fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for j in 0..n {
        out[j] = if j == i { 0.0 } else { (-(dist[j] - dmin) * beta).exp() };
        sum += out[j];
    }
    let mut weighted = 0.0;
    for j in 0..n {
        out[j] /= sum;
        weighted += out[j] * (dist[j] - dmin);
    }
    sum.ln() + beta * weighted
}

/// Joint affinities P (row-major n×n, symmetric, sums to 1).
pub fn joint_affinities(points: &[Vec<f64>], perplexity: f64) -> Vec<f64> {
    let n = points.len();
    let dist = squared_distances(points);
    let target = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        let row = &dist[i * n..(i + 1) * n];
        let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
        let out = &mut cond[i * n..(i + 1) * n];
        for _ in 0..SEARCH_STEPS {
            let h = conditional_row(row, i, beta, out);
            let diff = h - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
    }
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / denom).max(f64::MIN_POSITIVE);
        }
        p[i * n + i] = 0.0;
    }
    p
}

/// Unnormalized Student-t kernel (1 + ‖yi − yj‖²)⁻¹ and its sum.
fn student_t(y: &[[f64; 2]], num: &mut [f64]) -> f64 {
    let n = y.len();
    let mut sum = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    sum
}

pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let mut num = vec![0.0; p.len()];
    let z = student_t(y, &mut num);
    p.iter()
        .zip(&num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &nij)| pij * (pij / (nij / z).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

pub fn tsne(points: &[Vec<f64>], config: &TsneConfig) -> Result<TsneResult> {
    let n = points.len();
    if config.perplexity <= 0.0 || !config.perplexity.is_finite() {
        return Err(Error::InvalidArgument(format!("perplexity {} must be positive", config.perplexity)));
    }
    if (n as f64) <= 3.0 * config.perplexity {
        return Err(Error::InvalidArgument(format!(
            "t-SNE on {n} points needs perplexity below {:.3}; lower --perplexity",
            n as f64 / 3.0
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch("rows differ in width".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE input".into()));
    }
    let p = joint_affinities(points, config.perplexity);
    let normal = Normal::new(0.0, INIT_SIGMA).expect("valid sigma");
    let mut r = rng::stream(config.seed, "tsne-init");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut r), normal.sample(&mut r)]).collect();
    let learning_rate = (n as f64 / EXAGGERATION).max(50.0);
    let kl_initial = kl_divergence(&p, &y);
    let mut kl_after_exaggeration = None;
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    for iter in 0..config.iterations {
        let ex = if iter < EXAGGERATION_ITERS { EXAGGERATION } else { 1.0 };
        let momentum = if iter < MOMENTUM_SWITCH { 0.5 } else { 0.8 };
        let z = student_t(&y, &mut num);
        for i in 0..n {
            let mut g = [0.0f64; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num[i * n + j];
                let coef = 4.0 * (ex * p[i * n + j] - w / z) * w;
                g[0] += coef * (y[i][0] - y[j][0]);
                g[1] += coef * (y[i][1] - y[j][1]);
            }
            for k in 0..2 {
                let same = (g[k] > 0.0) == (update[i][k] > 0.0);
                gains[i][k] = if same { gains[i][k] * 0.8 } else { gains[i][k] + 0.2 };
                gains[i][k] = gains[i][k].max(MIN_GAIN);
                update[i][k] = momentum * update[i][k] - learning_rate * gains[i][k] * g[k];
            }
        }
        for (yi, u) in y.iter_mut().zip(&update) {
            yi[0] += u[0];
            yi[1] += u[1];
        }
        let mean = y.iter().fold([0.0, 0.0], |m, v| [m[0] + v[0], m[1] + v[1]]);
        for yi in &mut y {
            yi[0] -= mean[0] / n as f64;
            yi[1] -= mean[1] / n as f64;
        }
        if iter + 1 == EXAGGERATION_ITERS {
            kl_after_exaggeration = Some(kl_divergence(&p, &y));
        }
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE layout".into()));
    }
    let kl_final = kl_divergence(&p, &y);
    log::info!("t-SNE: KL initial {kl_initial:.4}, after exaggeration {kl_after_exaggeration:?}, final {kl_final:.4}");
    Ok(TsneResult {
        coords: y,
        kl_initial,
        kl_after_exaggeration,
        kl_final,
        learning_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    fn two_blobs(per_blob: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut r = rng::stream(seed, "blobs");
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for b in 0..2 {
            for _ in 0..per_blob {
                pts.push((0..10).map(|k| normal.sample(&mut r) + if k == 0 { 50.0 * b as f64 } else { 0.0 }).collect());
                labels.push(b);
            }
        }
        (pts, labels)
    }

    #[test]
    fn perplexity_is_hit() {
        let mut r = rng::stream(3, "perp");
        let pts: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let dist = squared_distances(&pts);
        let n = pts.len();
        let p = joint_affinities(&pts, 10.0);
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(p[i * n + j], p[j * n + i]);
            }
        }
        // rebuild one conditional row and check its perplexity independently
        let row = &dist[0..n];
        let (mut lo, mut hi) = (1e-6f64, 1e6f64);
        let perp = |beta: f64| {
            let w: Vec<f64> = (1..n).map(|j| (-row[j] * beta).exp()).collect();
            let s: f64 = w.iter().sum();
            let h: f64 = -w.iter().map(|x| x / s).filter(|&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>();
            h.exp()
        };
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if perp(mid) > 10.0 { lo = mid } else { hi = mid }
        }
        assert!((perp(lo) - 10.0).abs() < 1e-3);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0]; 30];
        let err = tsne(&pts, &TsneConfig { perplexity: 10.0, ..Default::default() }).unwrap_err();
        assert!(err.to_string().contains("perplexity"));
    }

    #[test]
    fn blobs_separate_and_kl_drops() {
        let (pts, labels) = two_blobs(150, 1);
        let cfg = TsneConfig { perplexity: 5.0, iterations: 1000, seed: 2 };
        let out = tsne(&pts, &cfg).unwrap();
        assert_eq!(out.coords.len(), 300);
        assert!(out.kl_final < out.kl_after_exaggeration.unwrap());
        let mean = |b: usize| {
            let sel: Vec<_> = out.coords.iter().zip(&labels).filter(|(_, &l)| l == b).map(|(c, _)| *c).collect();
            let k = sel.len() as f64;
            [sel.iter().map(|c| c[0]).sum::<f64>() / k, sel.iter().map(|c| c[1]).sum::<f64>() / k]
        };
        let (m0, m1) = (mean(0), mean(1));
        let correct = out
            .coords
            .iter()
            .zip(&labels)
            .filter(|(c, &l)| {
                let d0 = (c[0] - m0[0]).powi(2) + (c[1] - m0[1]).powi(2);
                let d1 = (c[0] - m1[0]).powi(2) + (c[1] - m1[1]).powi(2);
                (d0 < d1) == (l == 0)
            })
            .count();
        assert!(correct as f64 / 300.0 >= 0.95);
        assert_eq!(tsne(&pts, &cfg).unwrap(), out);
    }

    #[test]
    fn duplicate_rows_stay_finite() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![(i / 4) as f64, 0.0]).collect();
        let out = tsne(&pts, &TsneConfig { perplexity: 5.0, iterations: 300, seed: 0 }).unwrap();
        assert!(out.coords.iter().flatten().all(|v| v.is_finite()));
    }
}
