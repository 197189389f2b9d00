use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `q` orthonormal rows of length `D`.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component (divisor `count − 1`).
    pub explained_variance: Vec<f64>,
}

fn check_rows(rows: &[Vec<f64>], dim: usize) -> Result<()> {
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "row of width {} where {dim} was expected",
            r.len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input".into()));
    }
    Ok(())
}

/// Top-`q` principal axes from the SVD of the centered data. Each component
/// is signed so its largest-magnitude entry is positive.
pub fn pca_fit(rows: &[Vec<f64>], q: usize) -> Result<PcaModel> {
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    if n < q || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "PCA with {q} components needs at least {q} rows, got {n}"
        )));
    }
    if q > dim || q == 0 {
        return Err(Error::InvalidArgument(format!(
            "component count {q} must be in 1..={dim}"
        )));
    }
    check_rows(rows, dim)?;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::NonFinite("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let denom = (n.max(2) - 1) as f64;
    let mut components = Vec::with_capacity(q);
    let mut explained_variance = Vec::with_capacity(q);
    for &k in order.iter().take(q) {
        let mut row: Vec<f64> = v_t.row(k).iter().copied().collect();
        let lead = row
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best })
            .0;
        if row[lead] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(row);
        explained_variance.push(svd.singular_values[k].powi(2) / denom);
    }
    // rank-deficient input with fewer rows than dimensions: pad with
    // orthonormal completions so q rows always exist
    while components.len() < q {
        let e = complete_basis(&components, dim);
        components.push(e);
        explained_variance.push(0.0);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

fn complete_basis(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    for axis in 0..dim {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        for b in basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
    vec![0.0; dim]
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        check_rows(rows, self.dim())?;
        Ok(rows
            .iter()
            .map(|r| {
                self.components
                    .iter()
                    .map(|c| c.iter().zip(r).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
                    .collect()
            })
            .collect())
    }

    pub fn inverse_transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|z| {
                let mut x = self.mean.clone();
                for (zi, c) in z.iter().zip(&self.components) {
                    x.iter_mut().zip(c).for_each(|(xi, ci)| *xi += zi * ci);
                }
                x
            })
            .collect()
    }
}

pub fn pca_transform(model: &PcaModel, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    model.transform(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::RngExt;

    /// Cyclic Jacobi eigendecomposition of a symmetric matrix.
    fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v[k][p], v[k][q]);
                        v[k][p] = c * vkp - s * vkq;
                        v[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let vals = (0..n).map(|i| a[i][i]).collect();
        let vecs = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
        (vals, vecs)
    }

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, "pca-test");
        (0..n).map(|_| (0..d).map(|j| r.random_range(-1.0..1.0) * (j + 1) as f64).collect()).collect()
    }

    #[test]
    fn matches_covariance_eigendecomposition() {
        let rows = random_rows(50, 8, 3);
        let m = pca_fit(&rows, 3).unwrap();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..8).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let cov: Vec<Vec<f64>> = (0..8)
            .map(|a| (0..8).map(|b| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n - 1.0)).collect())
            .collect();
        let (vals, vecs) = jacobi_eigen(cov);
        let mut order: Vec<usize> = (0..8).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        for (k, &e) in order.iter().take(3).enumerate() {
            assert!((m.explained_variance[k] - vals[e]).abs() < 1e-6 * vals[e].max(1.0));
            let dot: f64 = m.components[k].iter().zip(&vecs[e]).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-6, "component {k}: |dot| = {}", dot.abs());
        }
    }

    #[test]
    fn rank_two_data_is_reconstructed() {
        let mut r = rng::stream(1, "plane");
        let (u, v) = ([1.0, 2.0, 0.0, -1.0, 0.5], [0.0, 1.0, 1.0, 1.0, -2.0]);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b): (f64, f64) = (r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
                (0..5).map(|j| 7.0 + a * u[j] + b * v[j]).collect()
            })
            .collect();
        let full = pca_fit(&rows, 5).unwrap();
        assert!(full.explained_variance[2..].iter().all(|&e| e < 1e-20));
        let m = pca_fit(&rows, 2).unwrap();
        let back = m.inverse_transform(&m.transform(&rows).unwrap());
        for (a, b) in rows.iter().zip(&back) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn full_rank_round_trip_and_orthonormal() {
        let rows = random_rows(40, 6, 7);
        let m = pca_fit(&rows, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let d: f64 = m.components[i].iter().zip(&m.components[j]).map(|(a, b)| a * b).sum();
                assert!((d - f64::from(i == j)).abs() < 1e-8);
            }
            let lead = m.components[i].iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(lead > 0.0);
        }
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        let back = m.inverse_transform(&m.transform(&rows).unwrap());
        for (a, b) in rows.iter().zip(&back) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-8);
            }
        }
        let z = m.transform(&[m.mean.clone()]).unwrap();
        assert!(z[0].iter().all(|v| v.abs() < 1e-12));
        let e0 = m.transform(&[m.mean.iter().zip(&m.components[0]).map(|(a, b)| a + b).collect()]).unwrap();
        assert!((e0[0][0] - 1.0).abs() < 1e-12 && e0[0][1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn errors() {
        assert!(pca_fit(&random_rows(2, 4, 1), 3).is_err());
        let m = pca_fit(&random_rows(10, 4, 1), 2).unwrap();
        assert!(m.transform(&[vec![1.0; 3]]).is_err());
    }
}
