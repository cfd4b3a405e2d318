use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_aabb, Aabb, Matrix3, Point3, Ray, Vector3};
use crate::perception::{Bvh, NormalField};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerWeights<T: Real> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Real> Default for PlannerWeights<T> {
    fn default() -> Self {
        Self { alpha: T::one(), beta: lit(0.5), gamma: lit(0.5) }
    }
}

impl<T: Real> PlannerWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha, self.beta, self.gamma];
        if w.iter().any(|v| !(*v >= T::zero())) {
            return Err(Error::InvalidArgument("planner weights must be non-negative".into()));
        }
        if w.iter().all(|v| *v == T::zero()) {
            return Err(Error::InvalidArgument("planner weights must not all be zero".into()));
        }
        Ok(())
    }

    /// `-alpha d + beta phi - gamma kappa`.
    pub fn score(&self, d_min: T, phi: T, kappa: T) -> T {
        -self.alpha * d_min + self.beta * phi - self.gamma * kappa
    }
}

/// Scored fingertip endpoint with an approach-aligned frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateEndpoint<T: Real> {
    pub position: Point3<T>,
    /// Columns are the fingertip frame axes; z points against the approach.
    pub rotation: Matrix3<T>,
    pub d_min: T,
    pub phi: T,
    pub kappa: T,
    pub score: T,
    /// Cloud point nearest to `position`.
    pub nearest: usize,
}

/// Fingertip frame with z along `-approach`, x orthogonalized against the
/// palm's y axis (palm x when the two are parallel).
pub fn approach_frame<T: Real>(approach: &Vector3<T>) -> Matrix3<T> {
    let z = -approach.normalize();
    let mut x = Vector3::y().cross(&z);
    if x.norm() < lit(1e-6) {
        x = Vector3::x() - z * z.x;
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

/// Nearest cloud point to `t` outside the surface patch of radius
/// `2 * fingertip_radius` around `t`'s nearest point.
pub fn occluder_distance<T: Real>(t: &Point3<T>, bvh: &Bvh<T>, fingertip_radius: T) -> Option<T> {
    let anchor = bvh.nearest(t).index;
    let center = bvh.points()[anchor];
    let patch_r2 = (fingertip_radius * lit(2.0)).powi(2);
    let pts = bvh.points();
    bvh.nearest_filtered(t, |i| (pts[i] - center).norm_squared() > patch_r2).map(|h| h.distance)
}

/// Composite endpoint score `-alpha d_min + beta phi - gamma kappa`.
///
/// `phi = |n . a|` at the nearest point; `kappa = max(0, 1 - c / clearance)`
/// with `c` the distance to the nearest point outside the contact patch.
pub fn score_endpoint<T: Real>(
    t: &Point3<T>,
    approach: &Vector3<T>,
    bvh: &Bvh<T>,
    normals: &NormalField<T>,
    weights: &PlannerWeights<T>,
    fingertip_radius: T,
    clearance: T,
) -> Result<CandidateEndpoint<T>> {
    if normals.normals.len() != bvh.len() {
        return Err(Error::Dimension { expected: bvh.len(), got: normals.normals.len() });
    }
    let a = approach.normalize();
    let hit = bvh.nearest(t);
    let phi = normals.normals[hit.index].dot(&a).abs().min(T::one());
    let kappa = match occluder_distance(t, bvh, fingertip_radius) {
        Some(c) => (T::one() - c / clearance).max(T::zero()),
        None => T::zero(),
    };
    Ok(CandidateEndpoint {
        position: *t,
        rotation: approach_frame(&a),
        d_min: hit.distance,
        phi,
        kappa,
        score: weights.score(hit.distance, phi, kappa),
        nearest: hit.index,
    })
}

/// True when no occluder is entered strictly before the ray from `camera`
/// reaches `t`.
pub fn visibility_check<T: Real>(camera: &Point3<T>, t: &Point3<T>, occluders: &[Aabb<T>]) -> Result<bool> {
    let d = t - camera;
    let dist = d.norm();
    if !(dist > T::zero()) {
        return Err(Error::InvalidArgument("camera and target coincide".into()));
    }
    let ray = Ray::new(*camera, d / dist)?;
    Ok(!occluders.iter().any(|b| matches!(ray_aabb(&ray, b), Some(h) if h.t_enter < dist)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::estimate_normals_with;

    fn sphere(n: usize) -> Vec<Point3<f64>> {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let th = golden * i as f64;
                Point3::new(r * th.cos(), y, r * th.sin())
            })
            .collect()
    }

    #[test]
    fn on_surface_head_on_scores_one() {
        let pts: Vec<Point3<f64>> = (0..400).map(|i| Point3::new((i % 20) as f64 * 0.005, (i / 20) as f64 * 0.005, 0.0)).collect();
        let bvh = Bvh::from_points(pts.clone(), 16).unwrap();
        let normals = estimate_normals_with(&bvh, 8, &Point3::new(0.05, 0.05, -1.0)).unwrap();
        let w = PlannerWeights { alpha: 1.0, beta: 1.0, gamma: 1.0 };
        let e = score_endpoint(&pts[210], &Vector3::z(), &bvh, &normals, &w, 0.008, 0.01).unwrap();
        assert_eq!(e.d_min, 0.0);
        assert!((e.phi - 1.0).abs() < 1e-9);
        assert_eq!(e.kappa, 0.0);
        assert!((e.score - 1.0).abs() < 1e-9);
        assert_eq!(e.score, w.score(e.d_min, e.phi, e.kappa));

        let side = score_endpoint(&pts[210], &Vector3::x(), &bvh, &normals, &w, 0.008, 0.01).unwrap();
        assert!(side.phi < 1e-9);
        assert_eq!(side.score, -w.alpha * side.d_min + w.beta * side.phi - w.gamma * side.kappa);
    }

    #[test]
    fn distance_to_sphere_cloud() {
        let pts = sphere(2000);
        let bvh = Bvh::from_points(pts.clone(), 16).unwrap();
        let normals = estimate_normals_with(&bvh, 10, &Point3::new(5.0, 0.0, 0.0)).unwrap();
        let t = Point3::new(2.0, 0.0, 0.0);
        let e = score_endpoint(&t, &-Vector3::x(), &bvh, &normals, &PlannerWeights::default(), 0.008, 0.01).unwrap();
        let oracle = pts.iter().map(|p| (p - t).norm()).fold(f64::INFINITY, f64::min);
        assert_eq!(e.d_min, oracle);
        assert!((e.d_min - 1.0).abs() < 0.01);
    }

    #[test]
    fn score_decreases_with_distance() {
        let w = PlannerWeights::<f64>::default();
        assert!(w.score(0.02, 0.7, 0.1) < w.score(0.01, 0.7, 0.1));
    }

    #[test]
    fn kappa_rises_near_occluders() {
        let grid: Vec<Point3<f64>> = (0..400).map(|i| Point3::new((i % 20) as f64 * 0.005, (i / 20) as f64 * 0.005, 0.0)).collect();
        let t = grid[210];
        let bare = Bvh::from_points(grid.clone(), 16).unwrap();
        // Nearest grid point outside the 8 mm patch is two spacings away.
        assert!((occluder_distance(&t, &bare, 0.004).unwrap() - 0.01).abs() < 1e-12);
        let mut cluttered = grid;
        cluttered.push(t + Vector3::new(0.0, 0.0, -0.009));
        let bvh = Bvh::from_points(cluttered, 16).unwrap();
        assert!((occluder_distance(&t, &bvh, 0.004).unwrap() - 0.009).abs() < 1e-12);

        let cam = Point3::new(0.0, 0.0, -1.0);
        let w = PlannerWeights::default();
        let k_bare = score_endpoint(&t, &Vector3::z(), &bare, &estimate_normals_with(&bare, 8, &cam).unwrap(), &w, 0.004, 0.02).unwrap().kappa;
        let k_near = score_endpoint(&t, &Vector3::z(), &bvh, &estimate_normals_with(&bvh, 8, &cam).unwrap(), &w, 0.004, 0.02).unwrap().kappa;
        assert!((k_bare - 0.5).abs() < 1e-9);
        assert!(k_near > k_bare);
    }

    #[test]
    fn frame_is_orthonormal() {
        for a in [Vector3::<f64>::new(0.3, -0.2, 0.9), Vector3::y(), -Vector3::y()] {
            let r = approach_frame(&a);
            assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            assert!((r.column(2) + a.normalize()).norm() < 1e-12);
        }
    }

    #[test]
    fn visibility_cases() {
        let cam = Point3::new(0.0, 0.0, 0.0);
        let t = Point3::new(4.0, 0.0, 0.0);
        assert!(visibility_check(&cam, &t, &[]).unwrap());
        let mid = Aabb::from_center_half_extents(Point3::new(2.0, 0.0, 0.0), Vector3::new(0.5, 0.5, 0.5)).unwrap();
        assert!(!visibility_check(&cam, &t, &[mid]).unwrap());
        // Entry at 5 > distance 4.
        let behind = Aabb::from_center_half_extents(Point3::new(5.5, 0.0, 0.0), Vector3::new(0.5, 0.5, 0.5)).unwrap();
        assert!(visibility_check(&cam, &t, &[behind]).unwrap());
        assert!(visibility_check(&cam, &cam, &[]).is_err());
    }
}
