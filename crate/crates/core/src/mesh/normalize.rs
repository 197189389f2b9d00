use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

/// Fixed-size point sample of one building surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub source_id: String,
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(source_id: String, points: Vec<Vec3>) -> Self {
        PointCloud { source_id, points }
    }

    pub fn with_source(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Shared scaling applied to every kept cloud, together with the percentile
/// band that decided which clouds were kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationManifest {
    pub global_scale: f64,
    pub lo_radius: f64,
    pub hi_radius: f64,
    pub percentile_lo: f64,
    pub percentile_hi: f64,
    pub kept_count: usize,
    pub dropped_count: usize,
}

/// Mean point and the largest distance from it.
pub fn centroid_radius(cloud: &PointCloud) -> Result<(Vec3, f64)> {
    if cloud.points.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    let n = cloud.points.len() as f64;
    let sum = cloud.points.iter().fold([0.0; 3], |acc, &p| geom::add(acc, p));
    let centroid = geom::scale(sum, 1.0 / n);
    let radius = cloud
        .points
        .iter()
        .map(|&p| geom::dist(p, centroid))
        .fold(0.0, f64::max);
    Ok((centroid, radius))
}

/// Linear-interpolation percentile (inclusive) of an ascending slice.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * pct / 100.0;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Keeps radii inside the `[lo_pct, hi_pct]` percentile band (bounds
/// inclusive). The upper cutoff becomes the global normalization scale.
pub fn percentile_filter(
    radii: &[f64],
    lo_pct: f64,
    hi_pct: f64,
) -> Result<(Vec<bool>, NormalizationManifest)> {
    if radii.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "percentile filter needs at least 2 radii, got {}",
            radii.len()
        )));
    }
    if !(0.0..=100.0).contains(&lo_pct) || !(lo_pct..=100.0).contains(&hi_pct) {
        return Err(Error::InvalidArgument(format!(
            "percentile band [{lo_pct}, {hi_pct}] is not within [0, 100]"
        )));
    }
    if radii.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("radii".into()));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo_radius = percentile(&sorted, lo_pct);
    let hi_radius = percentile(&sorted, hi_pct);
    if !(hi_radius > 0.0) {
        return Err(Error::InvalidArgument(
            "upper percentile radius is not positive".into(),
        ));
    }
    let keep: Vec<bool> = radii
        .iter()
        .map(|&r| lo_radius <= r && r <= hi_radius)
        .collect();
    let kept_count = keep.iter().filter(|&&k| k).count();
    let manifest = NormalizationManifest {
        global_scale: hi_radius,
        lo_radius,
        hi_radius,
        percentile_lo: lo_pct,
        percentile_hi: hi_pct,
        kept_count,
        dropped_count: radii.len() - kept_count,
    };
    Ok((keep, manifest))
}

/// Centers the cloud on its centroid and divides by the global scale.
pub fn normalize_cloud(cloud: &PointCloud, manifest: &NormalizationManifest) -> Result<PointCloud> {
    if !(manifest.global_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "global scale must be positive, got {}",
            manifest.global_scale
        )));
    }
    let (centroid, _) = centroid_radius(cloud)?;
    let inv = 1.0 / manifest.global_scale;
    let points = cloud
        .points
        .iter()
        .map(|&p| geom::scale(geom::sub(p, centroid), inv))
        .collect();
    Ok(PointCloud::new(cloud.source_id.clone(), points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference percentile: fractional rank r = p(n-1)/100 over the sorted
    /// data, blended between the two bracketing order statistics.
    fn reference_percentile(data: &[f64], p: f64) -> f64 {
        let mut v = data.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = p / 100.0 * (v.len() as f64 - 1.0);
        let below = rank.floor();
        let i = below as usize;
        if i + 1 >= v.len() {
            return v[v.len() - 1];
        }
        v[i] + (rank - below) * (v[i + 1] - v[i])
    }

    fn cloud(points: Vec<Vec3>) -> PointCloud {
        PointCloud::new("b".into(), points)
    }

    #[test]
    fn centroid_radius_cases() {
        let (c, r) = centroid_radius(&cloud(vec![[1.0, 2.0, 3.0]])).unwrap();
        assert_eq!((c, r), ([1.0, 2.0, 3.0], 0.0));
        let (c, r) = centroid_radius(&cloud(vec![[0.0; 3], [2.0, 0.0, 0.0]])).unwrap();
        assert_eq!((c, r), ([1.0, 0.0, 0.0], 1.0));
        assert!(centroid_radius(&cloud(vec![])).is_err());
    }

    #[test]
    fn hundred_radii_band() {
        let radii: Vec<f64> = (1..=100).map(f64::from).collect();
        let (keep, m) = percentile_filter(&radii, 1.0, 99.0).unwrap();
        assert!((m.lo_radius - 1.99).abs() < 1e-12);
        assert!((m.hi_radius - 99.01).abs() < 1e-12);
        assert_eq!(m.kept_count, 98);
        assert!(!keep[0] && keep[1] && keep[98] && !keep[99]);
        assert!((m.lo_radius - reference_percentile(&radii, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn equal_radii_all_kept() {
        let (keep, m) = percentile_filter(&[4.5; 7], 1.0, 99.0).unwrap();
        assert!(keep.iter().all(|&k| k));
        assert_eq!(m.global_scale, 4.5);
    }

    #[test]
    fn full_range_keeps_both() {
        let (keep, _) = percentile_filter(&[1.0, 1000.0], 0.0, 100.0).unwrap();
        assert_eq!(keep, vec![true, true]);
        assert!(percentile_filter(&[1.0], 1.0, 99.0).is_err());
    }

    #[test]
    fn normalize_defining_cases() {
        let m = NormalizationManifest {
            global_scale: 2.0,
            lo_radius: 0.5,
            hi_radius: 2.0,
            percentile_lo: 1.0,
            percentile_hi: 99.0,
            kept_count: 2,
            dropped_count: 0,
        };
        let c = cloud(vec![[10.0, 0.0, 0.0], [14.0, 0.0, 0.0]]);
        let n = normalize_cloud(&c, &m).unwrap();
        let (centroid, r) = centroid_radius(&n).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        assert!(geom::norm(centroid) < 1e-12);

        let half = cloud(vec![[10.0, 0.0, 0.0], [12.0, 0.0, 0.0]]);
        let (_, r_half) = centroid_radius(&normalize_cloud(&half, &m).unwrap()).unwrap();
        assert!((r / r_half - 2.0).abs() < 1e-12);

        let centered = cloud(vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let n = normalize_cloud(&centered, &m).unwrap();
        assert_eq!(n.points, vec![[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]]);

        let bad = NormalizationManifest {
            global_scale: 0.0,
            ..m
        };
        assert!(normalize_cloud(&c, &bad).is_err());
    }

    proptest! {
        #[test]
        fn kept_count_bounds(radii in proptest::collection::vec(0.01f64..100.0, 2..400)) {
            let n = radii.len();
            let (keep, m) = percentile_filter(&radii, 1.0, 99.0).unwrap();
            let kept = keep.iter().filter(|&&k| k).count();
            prop_assert_eq!(kept, m.kept_count);
            prop_assert!(kept + 2 >= (0.98 * n as f64).floor() as usize);
            prop_assert!(kept <= n);
            let (lo, hi) = (reference_percentile(&radii, 1.0), reference_percentile(&radii, 99.0));
            prop_assert!((m.lo_radius - lo).abs() <= 1e-12 * lo.abs().max(1.0));
            prop_assert!((m.hi_radius - hi).abs() <= 1e-12 * hi.abs().max(1.0));
            let expected: Vec<bool> = radii.iter().map(|&r| lo <= r && r <= hi).collect();
            prop_assert_eq!(keep, expected);
        }

        #[test]
        fn normalization_is_a_similarity(
            pts in proptest::collection::vec(proptest::array::uniform3(-50.0f64..50.0), 3..40),
            scale in 0.5f64..20.0,
        ) {
            let c = cloud(pts.clone());
            let m = NormalizationManifest {
                global_scale: scale, lo_radius: 0.0, hi_radius: scale,
                percentile_lo: 1.0, percentile_hi: 99.0, kept_count: 1, dropped_count: 0,
            };
            let n = normalize_cloud(&c, &m).unwrap();
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let before = geom::dist(pts[i], pts[j]);
                    let after = geom::dist(n.points[i], n.points[j]);
                    prop_assert!((after * scale - before).abs() <= 1e-9 * before.max(1.0));
                }
            }
        }
    }
}
