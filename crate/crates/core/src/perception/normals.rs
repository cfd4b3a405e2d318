use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Vector3};
use crate::scalar::{lit, Real};

use super::bvh::{Bvh, DEFAULT_LEAF_CAPACITY};

/// Unit normal per point, oriented toward the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField<T: Real> {
    pub normals: Vec<Vector3<T>>,
    pub k: usize,
}

pub fn estimate_normals<T: Real>(cloud: &PointCloud<T>, k: usize, camera: &Point3<T>) -> Result<NormalField<T>> {
    if k < 3 {
        return Err(Error::InvalidArgument("normal estimation needs k >= 3".into()));
    }
    if cloud.len() < k {
        return Err(Error::InsufficientPoints { needed: k, got: cloud.len() });
    }
    let bvh = Bvh::build(cloud, DEFAULT_LEAF_CAPACITY)?;
    estimate_normals_with(&bvh, k, camera)
}

/// Smallest-eigenvalue direction of each point's k-neighborhood covariance.
pub fn estimate_normals_with<T: Real>(bvh: &Bvh<T>, k: usize, camera: &Point3<T>) -> Result<NormalField<T>> {
    if k < 3 {
        return Err(Error::InvalidArgument("normal estimation needs k >= 3".into()));
    }
    if bvh.len() < k {
        return Err(Error::InsufficientPoints { needed: k, got: bvh.len() });
    }
    let pts = bvh.points();
    let normals = pts
        .iter()
        .map(|p| {
            let nb = bvh.k_nearest(p, k);
            let kf = lit::<T>(nb.len() as f64);
            let mean = nb.iter().fold(Vector3::zeros(), |acc, h| acc + pts[h.index].coords) / kf;
            let cov = nb.iter().fold(Matrix3::zeros(), |acc, h| {
                let d = pts[h.index].coords - mean;
                acc + d * d.transpose()
            }) / kf;
            let eig = SymmetricEigen::new(cov);
            let j = eig.eigenvalues.imin();
            let mut n: Vector3<T> = eig.eigenvectors.column(j).into_owned();
            let len = n.norm();
            n = if len > T::zero() { n / len } else { Vector3::z() };
            if n.dot(&(camera - p)) < T::zero() {
                n = -n;
            }
            n
        })
        .collect();
    Ok(NormalField { normals, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plane_normals_face_camera() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point3<f64>> = (0..500).map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0)).collect();
        let cloud = PointCloud::new(pts);
        let cam = Point3::new(0.0, 0.0, 2.0);
        for k in [10, 500] {
            let field = estimate_normals(&cloud, k, &cam).unwrap();
            for n in &field.normals {
                assert!(n.dot(&Vector3::z()).acos().to_degrees() < 2.0);
                assert!((n.norm() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut pts = Vec::new();
        while pts.len() < 3000 {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n: f64 = v.norm();
            if n > 0.1 && n <= 1.0 {
                pts.push(Point3::from(v / n));
            }
        }
        let cam = Point3::new(0.0, 0.0, 5.0);
        let field = estimate_normals(&PointCloud::new(pts.clone()), 12, &cam).unwrap();
        for (p, n) in pts.iter().zip(&field.normals) {
            assert!(n.dot(&(cam - p)) >= 0.0);
            let radial = p.coords;
            assert!(n.dot(&radial).abs().min(1.0).acos().to_degrees() < 5.0);
            let facing = radial.dot(&(cam - p).normalize());
            if facing > 0.1 {
                assert!(n.dot(&radial) > 0.0);
            } else if facing < -0.1 {
                assert!(n.dot(&radial) < 0.0);
            }
        }
    }

    #[test]
    fn too_few_points() {
        let cloud = PointCloud::new(vec![Point3::<f64>::origin(); 4]);
        assert!(matches!(estimate_normals(&cloud, 5, &Point3::origin()), Err(Error::InsufficientPoints { needed: 5, got: 4 })));
    }
}
