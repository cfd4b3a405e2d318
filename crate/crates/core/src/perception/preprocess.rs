use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, PointCloud, Vector3};
use crate::scalar::{lit, Real};

use super::bvh::{Bvh, DEFAULT_LEAF_CAPACITY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig<T: Real> {
    /// Neighbors used for the statistical outlier test.
    pub outlier_k: usize,
    /// Points whose mean neighbor distance exceeds `mean + outlier_stddev * std`
    /// are dropped.
    pub outlier_stddev: T,
    /// Neighbors of the local-plane projection that denoises surviving
    /// points; 0 disables it.
    pub denoise_k: usize,
    pub remove_plane: bool,
    pub plane_distance_threshold: T,
    pub plane_iterations: usize,
    /// A RANSAC plane is only removed when it holds at least this fraction of
    /// the remaining points.
    pub plane_min_fraction: T,
    pub crop_box: Option<Aabb<T>>,
    pub rng_seed: u64,
}

impl<T: Real> Default for PreprocessConfig<T> {
    fn default() -> Self {
        Self {
            outlier_k: 8,
            outlier_stddev: lit(2.0),
            denoise_k: 0,
            remove_plane: true,
            plane_distance_threshold: lit(0.005),
            plane_iterations: 200,
            plane_min_fraction: lit(0.2),
            crop_box: None,
            rng_seed: 0,
        }
    }
}

impl<T: Real> PreprocessConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.outlier_k < 3 {
            return Err(Error::InvalidArgument("outlier_k must be at least 3".into()));
        }
        if !(self.outlier_stddev > T::zero()) || !(self.plane_distance_threshold > T::zero()) {
            return Err(Error::InvalidArgument("preprocess thresholds must be positive".into()));
        }
        if self.denoise_k == 1 || self.denoise_k == 2 {
            return Err(Error::InvalidArgument("denoise_k must be 0 or at least 3".into()));
        }
        if self.remove_plane && self.plane_iterations == 0 {
            return Err(Error::InvalidArgument("plane_iterations must be positive".into()));
        }
        if !(self.plane_min_fraction >= T::zero() && self.plane_min_fraction <= T::one()) {
            return Err(Error::InvalidArgument("plane_min_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Why a point was dropped, or `Kept`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Removal {
    Kept,
    Outlier,
    Cropped,
    Plane,
}

/// Plane `normal . p = offset` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane<T: Real> {
    pub normal: Vector3<T>,
    pub offset: T,
}

impl<T: Real> Plane<T> {
    pub fn through(a: &Point3<T>, b: &Point3<T>, c: &Point3<T>) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if !(len > T::zero()) {
            return None;
        }
        let normal = n / len;
        Some(Self { normal, offset: normal.dot(&a.coords) })
    }

    pub fn distance(&self, p: &Point3<T>) -> T {
        (self.normal.dot(&p.coords) - self.offset).abs()
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed<T: Real> {
    pub cloud: PointCloud<T>,
    /// Input index of every output point.
    pub kept: Vec<usize>,
    /// One entry per input point.
    pub removal: Vec<Removal>,
    pub plane: Option<Plane<T>>,
}

/// Outlier removal, cropping, optional denoising, then removal of the
/// dominant plane. Denoising moves points but never adds or drops any.
pub fn preprocess<T: Real>(cloud: &PointCloud<T>, cfg: &PreprocessConfig<T>) -> Result<Preprocessed<T>> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = cloud.len();
    let mut removal = vec![Removal::Kept; n];

    for i in statistical_outliers(&cloud.points, cfg.outlier_k, cfg.outlier_stddev)? {
        removal[i] = Removal::Outlier;
    }
    if let Some(crop) = &cfg.crop_box {
        for (i, p) in cloud.points.iter().enumerate() {
            if removal[i] == Removal::Kept && !crop.contains_point(p) {
                removal[i] = Removal::Cropped;
            }
        }
    }

    let mut points = cloud.points.clone();
    if cfg.denoise_k > 0 {
        let live: Vec<usize> = (0..n).filter(|&i| removal[i] == Removal::Kept).collect();
        let sub: Vec<Point3<T>> = live.iter().map(|&i| points[i]).collect();
        for (&i, p) in live.iter().zip(denoise_points(&sub, cfg.denoise_k)?) {
            points[i] = p;
        }
    }

    let mut plane = None;
    if cfg.remove_plane {
        let live: Vec<usize> = (0..n).filter(|&i| removal[i] == Removal::Kept).collect();
        if let Some((p, inliers)) = ransac_plane(&points, &live, cfg) {
            let needed = lit::<T>(live.len() as f64) * cfg.plane_min_fraction;
            if lit::<T>(inliers.len() as f64) >= needed {
                for i in inliers {
                    removal[i] = Removal::Plane;
                }
                plane = Some(p);
            }
        }
    }

    let kept: Vec<usize> = (0..n).filter(|&i| removal[i] == Removal::Kept).collect();
    if kept.is_empty() {
        return Err(Error::EmptyAfterPreprocess);
    }
    log::debug!("preprocess kept {} of {} points", kept.len(), n);
    let out = PointCloud::new(kept.iter().map(|&i| points[i]).collect());
    Ok(Preprocessed { cloud: out, kept, removal, plane })
}

/// Projects every point onto the least-squares plane of its `k` nearest
/// neighbors (itself included). Clouds smaller than `k` come back unchanged.
pub fn denoise_points<T: Real>(points: &[Point3<T>], k: usize) -> Result<Vec<Point3<T>>> {
    if points.len() < k.max(3) {
        return Ok(points.to_vec());
    }
    let bvh = Bvh::from_points(points.to_vec(), DEFAULT_LEAF_CAPACITY)?;
    let kf = lit::<T>(k as f64);
    Ok(points
        .iter()
        .map(|p| {
            let nb = bvh.k_nearest(p, k);
            let mean = nb.iter().fold(Vector3::zeros(), |acc, h| acc + points[h.index].coords) / kf;
            let cov = nb.iter().fold(Matrix3::zeros(), |acc, h| {
                let d = points[h.index].coords - mean;
                acc + d * d.transpose()
            });
            let eig = SymmetricEigen::new(cov);
            let n = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
            p - n * n.dot(&(p.coords - mean))
        })
        .collect())
}

/// Indices whose mean distance to their `k` nearest neighbors is more than
/// `stddev` standard deviations above the cloud mean.
pub fn statistical_outliers<T: Real>(points: &[Point3<T>], k: usize, stddev: T) -> Result<Vec<usize>> {
    if points.len() <= k {
        return Ok(Vec::new());
    }
    let bvh = Bvh::from_points(points.to_vec(), DEFAULT_LEAF_CAPACITY)?;
    let kf = lit::<T>(k as f64);
    let means: Vec<T> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            bvh.k_nearest(p, k + 1)
                .into_iter()
                .filter(|h| h.index != i)
                .take(k)
                .fold(T::zero(), |acc, h| acc + h.distance)
                / kf
        })
        .collect();
    let nf = lit::<T>(points.len() as f64);
    let mean = means.iter().fold(T::zero(), |a, &b| a + b) / nf;
    let var = means.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / nf;
    let limit = mean + stddev * var.sqrt();
    Ok((0..points.len()).filter(|&i| means[i] > limit).collect())
}

/// Best plane over `candidates` by inlier count; returns the plane and its
/// inlier indices.
pub fn ransac_plane<T: Real>(points: &[Point3<T>], candidates: &[usize], cfg: &PreprocessConfig<T>) -> Option<(Plane<T>, Vec<usize>)> {
    if candidates.len() < 3 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let thr = cfg.plane_distance_threshold;
    let mut best: Option<(Plane<T>, usize)> = None;
    for _ in 0..cfg.plane_iterations {
        let a = candidates[rng.random_range(0..candidates.len())];
        let b = candidates[rng.random_range(0..candidates.len())];
        let c = candidates[rng.random_range(0..candidates.len())];
        if a == b || b == c || a == c {
            continue;
        }
        let Some(plane) = Plane::through(&points[a], &points[b], &points[c]) else {
            continue;
        };
        let count = candidates.iter().filter(|&&i| plane.distance(&points[i]) <= thr).count();
        if best.as_ref().is_none_or(|(_, bc)| count > *bc) {
            best = Some((plane, count));
        }
    }
    let (plane, _) = best?;
    let inliers = candidates.iter().copied().filter(|&i| plane.distance(&points[i]) <= thr).collect();
    Some((plane, inliers))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fibonacci_sphere(n: usize, radius: f64, center: Point3<f64>) -> Vec<Point3<f64>> {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let th = golden * i as f64;
                center + Vector3::new(r * th.cos(), y, r * th.sin()) * radius
            })
            .collect()
    }

    #[test]
    fn clean_cloud_passes_through() {
        let pts = fibonacci_sphere(800, 0.05, Point3::new(0.0, 0.0, 0.3));
        let cloud = PointCloud::new(pts.clone());
        let cfg = PreprocessConfig {
            outlier_stddev: 3.0,
            crop_box: Some(Aabb::new(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0)).unwrap()),
            ..Default::default()
        };
        let out = preprocess(&cloud, &cfg).unwrap();
        assert_eq!(out.kept, (0..pts.len()).collect::<Vec<_>>());
        assert_eq!(out.cloud.points, pts);
        assert!(out.plane.is_none());
    }

    #[test]
    fn single_plane_empties_cloud() {
        let pts: Vec<Point3<f64>> = (0..900).map(|i| Point3::new((i % 30) as f64 * 0.01, (i / 30) as f64 * 0.01, 0.2)).collect();
        let r = preprocess(&PointCloud::new(pts), &PreprocessConfig::default());
        assert!(matches!(r, Err(Error::EmptyAfterPreprocess)));
    }

    #[test]
    fn far_points_flagged_as_outliers() {
        let mut pts = fibonacci_sphere(500, 0.05, Point3::origin());
        pts.push(Point3::new(1.0, 1.0, 1.0));
        pts.push(Point3::new(-2.0, 0.0, 0.5));
        let found = statistical_outliers(&pts, 8, 2.0).unwrap();
        assert!(found.contains(&500) && found.contains(&501));
    }

    #[test]
    fn crop_labels_points_outside() {
        let pts = fibonacci_sphere(400, 0.05, Point3::origin());
        let cfg = PreprocessConfig {
            outlier_stddev: 10.0,
            remove_plane: false,
            crop_box: Some(Aabb::new(Point3::new(-1.0, -1.0, 0.0), Point3::new(1.0, 1.0, 1.0)).unwrap()),
            ..Default::default()
        };
        let out = preprocess(&PointCloud::new(pts.clone()), &cfg).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(out.removal[i] == Removal::Cropped, p.z < 0.0);
        }
    }

    #[test]
    fn rejects_small_k() {
        let cfg = PreprocessConfig::<f64> { outlier_k: 2, ..Default::default() };
        assert!(preprocess(&PointCloud::new(vec![Point3::origin()]), &cfg).is_err());
    }
}
