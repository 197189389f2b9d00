use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

const STEP_TOL: f64 = 1e-9;
const MAX_ITERS: usize = 1000;
/// Distance below which the iterate is treated as sitting on a data point.
const COINCIDENT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CenterMethod {
    /// Minimizer of summed Euclidean distances.
    #[default]
    Geometric,
    /// Per-axis median.
    Coordinate,
}

pub fn objective(points: &[Vec2], y: Vec2) -> f64 {
    points.iter().map(|p| (p[0] - y[0]).hypot(p[1] - y[1])).sum()
}

pub fn median_center(points: &[Vec2], method: CenterMethod) -> Result<Vec2> {
    if points.is_empty() {
        return Err(Error::Empty("median center of no points"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("location".into()));
    }
    Ok(match method {
        CenterMethod::Geometric => geometric_median(points),
        CenterMethod::Coordinate => coordinate_median(points),
    })
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

fn coordinate_median(points: &[Vec2]) -> Vec2 {
    [
        median_of(points.iter().map(|p| p[0]).collect()),
        median_of(points.iter().map(|p| p[1]).collect()),
    ]
}

/// Weiszfeld iteration from the centroid with the Vardi–Zhang rule at data
/// points. Each step also tries a Newton step and keeps whichever lands at
/// the smaller (sub)gradient norm: plain Weiszfeld crawls when the median
/// sits close to, but not on, a data point. Works in coordinates relative to the centroid so the 1e-9 m
/// step tolerance stays meaningful at projected-coordinate magnitudes.
fn geometric_median(points: &[Vec2]) -> Vec2 {
    let n = points.len() as f64;
    let origin = [
        points.iter().map(|p| p[0]).sum::<f64>() / n,
        points.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let local: Vec<Vec2> = points.iter().map(|p| [p[0] - origin[0], p[1] - origin[1]]).collect();
    let mut y = [0.0, 0.0];
    for _ in 0..MAX_ITERS {
        let mut next = weiszfeld_step(&local, y);
        if let Some(n) = newton_step(&local, y) {
            if gradient_norm(&local, n) < gradient_norm(&local, next) {
                next = n;
            }
        }
        let step = (next[0] - y[0]).hypot(next[1] - y[1]);
        y = next;
        if step < STEP_TOL {
            break;
        }
    }
    // never worse than the best data point
    let best = local
        .iter()
        .copied()
        .min_by(|a, b| objective(&local, *a).total_cmp(&objective(&local, *b)))
        .expect("non-empty");
    if objective(&local, best) < objective(&local, y) {
        y = best;
    }
    [y[0] + origin[0], y[1] + origin[1]]
}

/// Norm of the minimum-norm subgradient of the objective at `y`.
fn gradient_norm(points: &[Vec2], y: Vec2) -> f64 {
    let mut g = [0.0, 0.0];
    let mut coincident = 0.0;
    for p in points {
        let d = (p[0] - y[0]).hypot(p[1] - y[1]);
        if d < COINCIDENT {
            coincident += 1.0;
        } else {
            g[0] += (y[0] - p[0]) / d;
            g[1] += (y[1] - p[1]) / d;
        }
    }
    (g[0].hypot(g[1]) - coincident).max(0.0)
}

fn newton_step(points: &[Vec2], y: Vec2) -> Option<Vec2> {
    let (mut g, mut h) = ([0.0, 0.0], [0.0, 0.0, 0.0]);
    for p in points {
        let (dx, dy) = (y[0] - p[0], y[1] - p[1]);
        let d = dx.hypot(dy);
        if d < COINCIDENT {
            return None;
        }
        let d3 = d * d * d;
        g[0] += dx / d;
        g[1] += dy / d;
        h[0] += dy * dy / d3;
        h[1] -= dx * dy / d3;
        h[2] += dx * dx / d3;
    }
    let det = h[0] * h[2] - h[1] * h[1];
    if !(det > 1e-300) {
        return None;
    }
    let step = [(h[2] * g[0] - h[1] * g[1]) / det, (h[0] * g[1] - h[1] * g[0]) / det];
    let next = [y[0] - step[0], y[1] - step[1]];
    next.iter().all(|v| v.is_finite()).then_some(next)
}

fn weiszfeld_step(points: &[Vec2], y: Vec2) -> Vec2 {
    let mut num = [0.0, 0.0];
    let mut den = 0.0;
    let mut r = [0.0, 0.0];
    let mut coincident = 0.0;
    for p in points {
        let d = (p[0] - y[0]).hypot(p[1] - y[1]);
        if d < COINCIDENT {
            coincident += 1.0;
            continue;
        }
        num[0] += p[0] / d;
        num[1] += p[1] / d;
        den += 1.0 / d;
        r[0] += (p[0] - y[0]) / d;
        r[1] += (p[1] - y[1]) / d;
    }
    if den == 0.0 {
        return y;
    }
    let t = [num[0] / den, num[1] / den];
    if coincident == 0.0 {
        return t;
    }
    let rn = r[0].hypot(r[1]);
    if rn <= coincident {
        // optimality condition holds at the data point
        return y;
    }
    let w = coincident / rn;
    [(1.0 - w) * t[0] + w * y[0], (1.0 - w) * t[1] + w * y[1]]
}
