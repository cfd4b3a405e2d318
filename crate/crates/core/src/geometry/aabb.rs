use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{infinity, lit, Real};

use super::{convex_hull_volume, Point3, PointCloud, Vector3};

/// Axis-aligned bounding box stored as coordinate extrema.
///
/// The center/half-extent view is derived on demand: `c = (min + max) / 2`,
/// `h = (max - min) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T: Real> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> Aabb<T> {
    /// Builds a box from extrema. Fails when `min > max` on any axis or a
    /// coordinate is not finite.
    pub fn new(min: Point3<T>, max: Point3<T>) -> Result<Self> {
        for a in 0..3 {
            if !(min[a].is_finite() && max[a].is_finite()) {
                return Err(Error::InvalidArgument("non-finite box coordinate".into()));
            }
            if min[a] > max[a] {
                return Err(Error::InvalidArgument(format!("box min > max on axis {a}")));
            }
        }
        Ok(Self { min, max })
    }

    /// Zero-volume box at a single point.
    pub fn from_point(p: Point3<T>) -> Self {
        Self { min: p, max: p }
    }

    pub fn from_center_half_extents(center: Point3<T>, half: Vector3<T>) -> Result<Self> {
        if half.iter().any(|h| *h < T::zero()) {
            return Err(Error::InvalidArgument("negative half-extent".into()));
        }
        Self::new(center - half, center + half)
    }

    /// Tightest box around `points` (coordinate-wise extrema).
    pub fn from_points(points: &[Point3<T>]) -> Result<Self> {
        let (first, rest) = points.split_first().ok_or(Error::EmptyInput)?;
        let mut min = *first;
        let mut max = *first;
        for p in rest {
            for a in 0..3 {
                if p[a] < min[a] {
                    min[a] = p[a];
                }
                if p[a] > max[a] {
                    max[a] = p[a];
                }
            }
        }
        Ok(Self { min, max })
    }

    pub fn from_cloud(cloud: &PointCloud<T>) -> Result<Self> {
        Self::from_points(&cloud.points)
    }

    pub fn center(&self) -> Point3<T> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn half_extents(&self) -> Vector3<T> {
        (self.max - self.min) * lit::<T>(0.5)
    }

    pub fn center_half_extents(&self) -> (Point3<T>, Vector3<T>) {
        (self.center(), self.half_extents())
    }

    /// Edge lengths `(l_x, l_y, l_z)`.
    pub fn edge_lengths(&self) -> Vector3<T> {
        self.max - self.min
    }

    pub fn volume(&self) -> T {
        let l = self.edge_lengths();
        l.x * l.y * l.z
    }

    pub fn surface_area(&self) -> T {
        let l = self.edge_lengths();
        lit::<T>(2.0) * (l.x * l.y + l.y * l.z + l.z * l.x)
    }

    /// Grows every half-extent by `r`, keeping the center.
    pub fn inflate(&self, r: T) -> Result<Self> {
        if !(r >= T::zero()) {
            return Err(Error::InvalidArgument("inflation radius must be >= 0".into()));
        }
        let d = Vector3::repeat(r);
        Ok(Self { min: self.min - d, max: self.max + d })
    }

    /// Closed-box membership.
    pub fn contains_point(&self, p: &Point3<T>) -> bool {
        (0..3).all(|a| self.min[a] <= p[a] && p[a] <= self.max[a])
    }

    pub fn contains_box(&self, other: &Aabb<T>) -> bool {
        self.contains_point(&other.min) && self.contains_point(&other.max)
    }

    pub fn union(&self, other: &Aabb<T>) -> Aabb<T> {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn overlaps(&self, other: &Aabb<T>) -> bool {
        aabb_overlap(self, other)
    }

    /// Squared Euclidean distance from `p` to the box, zero inside.
    pub fn distance_squared_to_point(&self, p: &Point3<T>) -> T {
        let mut acc = T::zero();
        for a in 0..3 {
            let d = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                T::zero()
            };
            acc += d * d;
        }
        acc
    }

    pub fn distance_to_point(&self, p: &Point3<T>) -> T {
        self.distance_squared_to_point(p).sqrt()
    }

    /// Squared gap between two boxes, zero when they touch or overlap.
    pub fn distance_squared_to_box(&self, other: &Aabb<T>) -> T {
        let mut acc = T::zero();
        for a in 0..3 {
            let d = (self.min[a] - other.max[a]).max(other.min[a] - self.max[a]).max(T::zero());
            acc += d * d;
        }
        acc
    }

    /// Axis of the largest edge; ties resolve to the lowest axis.
    pub fn longest_axis(&self) -> usize {
        let l = self.edge_lengths();
        let mut best = 0;
        for a in 1..3 {
            if l[a] > l[best] {
                best = a;
            }
        }
        best
    }

    /// An inverted box, the identity for [`Aabb::union`].
    pub(crate) fn empty() -> Self {
        let inf = infinity::<T>();
        Self { min: Point3::new(inf, inf, inf), max: Point3::new(-inf, -inf, -inf) }
    }

    pub(crate) fn grow(&mut self, p: &Point3<T>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }
}

/// Center/half-extent separating-axis test. Touching faces count as overlap.
pub fn aabb_overlap<T: Real>(a: &Aabb<T>, b: &Aabb<T>) -> bool {
    let (ca, ha) = a.center_half_extents();
    let (cb, hb) = b.center_half_extents();
    (0..3).all(|k| (ca[k] - cb[k]).abs() <= ha[k] + hb[k])
}

/// Tightness of a box around a cloud: `1 - V_hull / V_box`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmptySpaceRatio<T: Real> {
    pub eta: T,
    pub hull_volume: T,
    pub box_volume: T,
    /// Set when the box has zero volume; `eta` is then reported as 1.
    pub degenerate: bool,
}

/// Empty-space ratio of `cloud` inside `bounds`, clamped to `[0, 1]`.
pub fn empty_space_ratio<T: Real>(cloud: &PointCloud<T>, bounds: &Aabb<T>) -> Result<EmptySpaceRatio<T>> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    let box_volume = bounds.volume();
    if box_volume <= T::zero() {
        return Ok(EmptySpaceRatio { eta: T::one(), hull_volume: T::zero(), box_volume, degenerate: true });
    }
    let hull_volume = convex_hull_volume(&cloud.points);
    let eta = (T::one() - hull_volume / box_volume).max(T::zero()).min(T::one());
    Ok(EmptySpaceRatio { eta, hull_volume, box_volume, degenerate: false })
}
