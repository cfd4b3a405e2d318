use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{infinity, Real};

use super::{Aabb, Point3, Vector3};

/// Parametric ray `o + t d`. The direction need not be unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray<T: Real> {
    origin: Point3<T>,
    direction: Vector3<T>,
}

impl<T: Real> Ray<T> {
    pub fn new(origin: Point3<T>, direction: Vector3<T>) -> Result<Self> {
        if !(direction.norm() > T::zero()) {
            return Err(Error::InvalidArgument("ray direction must be nonzero".into()));
        }
        Ok(Self { origin, direction })
    }

    pub fn origin(&self) -> Point3<T> {
        self.origin
    }

    pub fn direction(&self) -> Vector3<T> {
        self.direction
    }

    pub fn at(&self, t: T) -> Point3<T> {
        self.origin + self.direction * t
    }
}

/// Entry and exit parameters of a ray crossing a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayHit<T: Real> {
    pub t_enter: T,
    pub t_exit: T,
}

/// Slab test. Reports a hit when the per-axis intervals intersect with
/// `t_enter <= t_exit` and `t_exit >= 0`; `t_enter` may be negative when the
/// origin is inside the box.
///
/// An axis with a zero direction component contributes `(-inf, +inf)` when the
/// origin lies within that slab and forces a miss otherwise.
pub fn ray_aabb<T: Real>(ray: &Ray<T>, bounds: &Aabb<T>) -> Option<RayHit<T>> {
    let inf = infinity::<T>();
    let mut t_enter = -inf;
    let mut t_exit = inf;
    for a in 0..3 {
        let o = ray.origin[a];
        let d = ray.direction[a];
        if d == T::zero() {
            if o < bounds.min[a] || o > bounds.max[a] {
                return None;
            }
            continue;
        }
        let t1 = (bounds.min[a] - o) / d;
        let t2 = (bounds.max[a] - o) / d;
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        if lo > t_enter {
            t_enter = lo;
        }
        if hi < t_exit {
            t_exit = hi;
        }
    }
    (t_enter <= t_exit && t_exit >= T::zero()).then_some(RayHit { t_enter, t_exit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> Aabb<f64> {
        Aabb::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn axis_ray_boundary_example() {
        let ray = Ray::new(Point3::new(-1.0, 0.5, 0.5), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let hit = ray_aabb(&ray, &unit_cube()).unwrap();
        assert_eq!(hit.t_enter, 1.0);
        assert_eq!(hit.t_exit, 2.0);
    }

    #[test]
    fn miss_when_outside_zero_direction_slab() {
        let ray = Ray::new(Point3::new(-1.0, 5.0, 0.5), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(ray_aabb(&ray, &unit_cube()).is_none());
    }

    #[test]
    fn box_behind_origin_misses() {
        let ray = Ray::new(Point3::new(3.0, 0.5, 0.5), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(ray_aabb(&ray, &unit_cube()).is_none());
    }

    #[test]
    fn origin_inside_has_negative_entry() {
        let ray = Ray::new(Point3::new(0.5, 0.5, 0.5), Vector3::new(0.0, 0.0, 2.0)).unwrap();
        let hit = ray_aabb(&ray, &unit_cube()).unwrap();
        assert_eq!(hit.t_enter, -0.25);
        assert_eq!(hit.t_exit, 0.25);
    }

    #[test]
    fn hit_parameters_lie_on_boundary() {
        let b = unit_cube();
        let ray = Ray::new(Point3::new(-0.7, -0.3, 0.2), Vector3::new(1.3, 0.9, 0.4)).unwrap();
        let hit = ray_aabb(&ray, &b).unwrap();
        for t in [hit.t_enter, hit.t_exit] {
            let p = ray.at(t);
            let on_face = (0..3).any(|a| (p[a] - b.min[a]).abs() < 1e-9 || (p[a] - b.max[a]).abs() < 1e-9);
            assert!(on_face);
            assert!(b.inflate(1e-9).unwrap().contains_point(&p));
        }
    }

    #[test]
    fn zero_direction_rejected() {
        assert!(Ray::new(Point3::<f64>::origin(), Vector3::zeros()).is_err());
    }
}
