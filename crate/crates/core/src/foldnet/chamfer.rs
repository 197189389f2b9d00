//! Chamfer distance: the larger of the two directed mean nearest-neighbor
//! Euclidean distances.

use super::Scalar;
use crate::error::{Error, Result};
use crate::spatial::KdTree;

/// Below this many point pairs a direct scan beats building a tree.
const BRUTE_FORCE_PAIRS: usize = 1 << 14;

fn dist2<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn nearest_scan<T: Scalar>(from: &[[T; 3]], to: &[[T; 3]]) -> Vec<usize> {
    from.iter()
        .map(|p| {
            let mut best = (T::infinity(), 0);
            for (j, q) in to.iter().enumerate() {
                let d = dist2(p, q);
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

fn to_f64<T: Scalar>(pts: &[[T; 3]]) -> Vec<[f64; 3]> {
    pts.iter()
        .map(|p| p.map(|v| v.to_f64().unwrap_or(f64::NAN)))
        .collect()
}

fn nearest_indexed<T: Scalar>(from: &[[T; 3]], to: &[[T; 3]]) -> Vec<usize> {
    let tree = KdTree::new(&to_f64(to));
    to_f64(from)
        .iter()
        .map(|p| tree.nearest(p).map_or(0, |(i, _)| i))
        .collect()
}

/// For each point of `from`, the index of its nearest point in `to`
/// (lowest index on ties).
pub fn nearest_indices<T: Scalar>(from: &[[T; 3]], to: &[[T; 3]]) -> Vec<usize> {
    if from.len() * to.len() <= BRUTE_FORCE_PAIRS {
        nearest_scan(from, to)
    } else {
        nearest_indexed(from, to)
    }
}

fn directed_mean<T: Scalar>(from: &[[T; 3]], to: &[[T; 3]], nn: &[usize]) -> T {
    let sum = from
        .iter()
        .zip(nn)
        .fold(T::zero(), |acc, (p, &j)| acc + dist2(p, &to[j]).sqrt());
    sum / T::from(from.len()).unwrap_or_else(T::one)
}

fn check<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("chamfer point cloud"));
    }
    Ok(())
}

pub fn chamfer<T: Scalar>(a: &[[T; 3]], b: &[[T; 3]]) -> Result<T> {
    check(a, b)?;
    let ab = directed_mean(a, b, &nearest_indices(a, b));
    let ba = directed_mean(b, a, &nearest_indices(b, a));
    Ok(if ab >= ba { ab } else { ba })
}

/// Chamfer distance that always goes through the kd-tree.
pub fn chamfer_indexed<T: Scalar>(a: &[[T; 3]], b: &[[T; 3]]) -> Result<T> {
    check(a, b)?;
    let ab = directed_mean(a, b, &nearest_indexed(a, b));
    let ba = directed_mean(b, a, &nearest_indexed(b, a));
    Ok(if ab >= ba { ab } else { ba })
}

/// Distance and its (sub)gradient with respect to the points of `b`.
/// The gradient follows whichever direction attains the max (ties: a→b)
/// and each point's argmin partner; coincident pairs contribute zero.
pub fn chamfer_grad_b<T: Scalar>(a: &[[T; 3]], b: &[[T; 3]]) -> Result<(T, Vec<[T; 3]>)> {
    check(a, b)?;
    let nn_ab = nearest_indices(a, b);
    let nn_ba = nearest_indices(b, a);
    let ab = directed_mean(a, b, &nn_ab);
    let ba = directed_mean(b, a, &nn_ba);
    let mut grad = vec![[T::zero(); 3]; b.len()];
    if ab >= ba {
        let w = T::one() / T::from(a.len()).unwrap_or_else(T::one);
        for (p, &j) in a.iter().zip(&nn_ab) {
            let d = dist2(p, &b[j]).sqrt();
            if d > T::zero() {
                for k in 0..3 {
                    grad[j][k] = grad[j][k] + w * (b[j][k] - p[k]) / d;
                }
            }
        }
        Ok((ab, grad))
    } else {
        let w = T::one() / T::from(b.len()).unwrap_or_else(T::one);
        for (j, (q, &i)) in b.iter().zip(&nn_ba).enumerate() {
            let d = dist2(q, &a[i]).sqrt();
            if d > T::zero() {
                for k in 0..3 {
                    grad[j][k] = w * (q[k] - a[i][k]) / d;
                }
            }
        }
        Ok((ba, grad))
    }
}
