//! AABB arithmetic, ray and overlap tests, rigid transforms and convex-hull
//! volume. Every value here is immutable once built and every function is pure.

mod aabb;
mod cloud;
mod hull;
mod ray;
mod transform;

pub use aabb::{aabb_overlap, empty_space_ratio, Aabb, EmptySpaceRatio};
pub use cloud::{PointCloud, PointLabel};
pub use hull::{convex_hull, convex_hull_volume, ConvexHull};
pub use ray::{ray_aabb, Ray, RayHit};
pub use transform::{transform_aabb, RigidTransform, TransformMode};

pub use nalgebra::{Matrix3, Point3, Unit, Vector3};
