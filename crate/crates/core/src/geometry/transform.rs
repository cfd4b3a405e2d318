use std::ops::Mul;

use nalgebra::{Matrix4, Rotation3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{tol, Real};

use super::{Aabb, Matrix3, Point3, Unit, Vector3};

/// Rotation + translation, equivalently a 4x4 homogeneous matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform<T: Real> {
    rotation: Matrix3<T>,
    translation: Vector3<T>,
}

impl<T: Real> RigidTransform<T> {
    /// Validates `R^T R = I` and `det R = +1` within the scalar's tolerance.
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Result<Self> {
        let t = tol::<T>();
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.iter().any(|e| e.abs() > t) {
            return Err(Error::InvalidArgument("rotation is not orthonormal".into()));
        }
        if (rotation.determinant() - T::one()).abs() > t {
            return Err(Error::InvalidArgument("rotation determinant is not +1".into()));
        }
        if translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    pub fn from_axis_angle(axis: &Unit<Vector3<T>>, angle: T) -> Self {
        Self {
            rotation: Rotation3::from_axis_angle(axis, angle).into_inner(),
            translation: Vector3::zeros(),
        }
    }

    /// Row-major rotation (9 values) followed by the translation (3 values).
    pub fn from_row_major(values: &[T; 12]) -> Result<Self> {
        let r = Matrix3::new(
            values[0], values[1], values[2], values[3], values[4], values[5], values[6], values[7], values[8],
        );
        Self::new(r, Vector3::new(values[9], values[10], values[11]))
    }

    pub fn to_row_major(&self) -> [T; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)], t.x, t.y, t.z]
    }

    pub fn from_homogeneous(m: &Matrix4<T>) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)] - T::one()];
        if bottom.iter().any(|e| e.abs() > tol::<T>()) {
            return Err(Error::InvalidArgument("last homogeneous row must be (0, 0, 0, 1)".into()));
        }
        Self::new(m.fixed_view::<3, 3>(0, 0).into_owned(), m.fixed_view::<3, 1>(0, 3).into_owned())
    }

    pub fn to_homogeneous(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn rotation(&self) -> &Matrix3<T> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<T> {
        &self.translation
    }

    pub fn position(&self) -> Point3<T> {
        Point3::from(self.translation)
    }

    pub fn transform_point(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        Self {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

impl<T: Real> Mul for RigidTransform<T> {
    type Output = RigidTransform<T>;

    fn mul(self, rhs: Self) -> Self::Output {
        self.compose(&rhs)
    }
}

impl<'a, T: Real> Mul<&'a RigidTransform<T>> for &'a RigidTransform<T> {
    type Output = RigidTransform<T>;

    fn mul(self, rhs: &'a RigidTransform<T>) -> Self::Output {
        self.compose(rhs)
    }
}

/// How a box is carried through a rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformMode {
    /// Refit around all eight transformed corners; always contains the
    /// transformed box.
    #[default]
    CornerRefit,
    /// Transform only `p_min` and `p_max`, then re-sort componentwise. Exact for
    /// translations and axis permutations only.
    ExtremaOnly,
}

pub fn transform_aabb<T: Real>(tf: &RigidTransform<T>, bounds: &Aabb<T>, mode: TransformMode) -> Aabb<T> {
    match mode {
        TransformMode::CornerRefit => {
            let mut out = Aabb::empty();
            for i in 0..8 {
                let c = Point3::new(
                    if i & 1 == 0 { bounds.min.x } else { bounds.max.x },
                    if i & 2 == 0 { bounds.min.y } else { bounds.max.y },
                    if i & 4 == 0 { bounds.min.z } else { bounds.max.z },
                );
                out.grow(&tf.transform_point(&c));
            }
            out
        }
        TransformMode::ExtremaOnly => {
            let a = tf.transform_point(&bounds.min);
            let b = tf.transform_point(&bounds.max);
            Aabb { min: a.inf(&b), max: a.sup(&b) }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn z_axis() -> Unit<Vector3<f64>> {
        Vector3::z_axis()
    }

    #[test]
    fn rejects_non_orthonormal() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(reflect, Vector3::zeros()).is_err());
    }

    #[test]
    fn row_major_and_homogeneous_round_trip() {
        let tf = RigidTransform::from_axis_angle(&z_axis(), 0.3) * RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let back = RigidTransform::from_row_major(&tf.to_row_major()).unwrap();
        assert_eq!(back, tf);
        let back = RigidTransform::from_homogeneous(&tf.to_homogeneous()).unwrap();
        assert_eq!(back, tf);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let tf = RigidTransform::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, 2.0, -0.5)), 1.1)
            * RigidTransform::from_translation(Vector3::new(0.3, -0.2, 0.9));
        let id = tf.compose(&tf.inverse());
        assert!((id.rotation() - Matrix3::identity()).norm() < 1e-12);
        assert!(id.translation().norm() < 1e-12);
    }

    #[test]
    fn identity_and_translation_modes_agree() {
        let b = Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 1.0)).unwrap();
        for mode in [TransformMode::CornerRefit, TransformMode::ExtremaOnly] {
            assert_eq!(transform_aabb(&RigidTransform::identity(), &b, mode), b);
            let moved = transform_aabb(&RigidTransform::from_translation(Vector3::new(0.1, 0.0, 0.0)), &b, mode);
            assert_eq!(moved.min, Point3::new(0.1, 0.0, 0.0));
            assert_eq!(moved.max, Point3::new(1.1, 2.0, 1.0));
        }
    }

    #[test]
    fn rotation_refit_matches_corner_oracle() {
        let b = Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 1.0)).unwrap();
        let tf = RigidTransform::from_axis_angle(&z_axis(), FRAC_PI_2);
        let refit = transform_aabb(&tf, &b, TransformMode::CornerRefit);
        let l = refit.edge_lengths();
        assert!((l - Vector3::new(2.0, 1.0, 1.0)).norm() < 1e-12);

        // Brute-force eight-corner refit.
        let mut lo = Point3::new(f64::MAX, f64::MAX, f64::MAX);
        let mut hi = Point3::new(f64::MIN, f64::MIN, f64::MIN);
        for x in [0.0, 1.0] {
            for y in [0.0, 2.0] {
                for z in [0.0, 1.0] {
                    let p = tf.transform_point(&Point3::new(x, y, z));
                    lo = lo.inf(&p);
                    hi = hi.sup(&p);
                }
            }
        }
        assert!((refit.min - lo).norm() < 1e-12 && (refit.max - hi).norm() < 1e-12);

        // A quarter turn only permutes axes, so the literal form coincides here.
        let literal = transform_aabb(&tf, &b, TransformMode::ExtremaOnly);
        assert!((literal.min - lo).norm() < 1e-12 && (literal.max - hi).norm() < 1e-12);

        let skew = RigidTransform::from_axis_angle(&z_axis(), 0.4);
        let refit_skew = transform_aabb(&skew, &b, TransformMode::CornerRefit);
        let literal_skew = transform_aabb(&skew, &b, TransformMode::ExtremaOnly);
        assert!(refit_skew.contains_box(&literal_skew));
        assert!(refit_skew.volume() > literal_skew.volume() + 1e-6);
        assert!(refit.contains_box(&literal));
    }
}
