use nalgebra::{DVector, Dyn, OMatrix, Rotation3, U6};

use crate::error::{Error, Result};
use crate::geometry::{Matrix3, Point3, RigidTransform, Unit, Vector3};
use crate::scalar::{tol, Real};

/// Joint angles in radians, one per joint of a chain.
pub type JointConfig<T> = DVector<T>;

/// Tip velocity Jacobian: rows 0..3 linear, rows 3..6 angular.
pub type Jacobian<T> = OMatrix<T, U6, Dyn>;

/// Revolute joint: fixed offset from the previous frame, then rotation about
/// `axis` in the offset frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint<T: Real> {
    parent_offset: RigidTransform<T>,
    axis: Unit<Vector3<T>>,
    limits: [T; 2],
    velocity_limit: T,
}

impl<T: Real> Joint<T> {
    pub fn new(parent_offset: RigidTransform<T>, axis: Vector3<T>, limits: [T; 2], velocity_limit: T) -> Result<Self> {
        if (axis.norm() - T::one()).abs() > tol::<T>() {
            return Err(Error::InvalidArgument("joint axis must be unit length".into()));
        }
        if !(limits[0] < limits[1]) {
            return Err(Error::InvalidArgument("joint limits require q_lo < q_hi".into()));
        }
        if !(velocity_limit > T::zero()) {
            return Err(Error::InvalidArgument("velocity limit must be positive".into()));
        }
        Ok(Self { parent_offset, axis: Unit::new_normalize(axis), limits, velocity_limit })
    }

    pub fn parent_offset(&self) -> &RigidTransform<T> {
        &self.parent_offset
    }

    pub fn axis(&self) -> &Unit<Vector3<T>> {
        &self.axis
    }

    pub fn limits(&self) -> [T; 2] {
        self.limits
    }

    pub fn velocity_limit(&self) -> T {
        self.velocity_limit
    }

    fn motion(&self, q: T) -> RigidTransform<T> {
        RigidTransform::from_axis_angle(&self.axis, q)
    }
}

/// Serial chain of revolute joints ending at a fingertip frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerChain<T: Real> {
    pub name: String,
    joints: Vec<Joint<T>>,
    tip_offset: RigidTransform<T>,
}

impl<T: Real> FingerChain<T> {
    pub fn new(name: impl Into<String>, joints: Vec<Joint<T>>, tip_offset: RigidTransform<T>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidArgument("a chain needs at least one joint".into()));
        }
        Ok(Self { name: name.into(), joints, tip_offset })
    }

    pub fn joints(&self) -> &[Joint<T>] {
        &self.joints
    }

    pub fn tip_offset(&self) -> &RigidTransform<T> {
        &self.tip_offset
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    fn check_dim(&self, q: &JointConfig<T>) -> Result<()> {
        if q.len() != self.joints.len() {
            return Err(Error::Dimension { expected: self.joints.len(), got: q.len() });
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, q: &JointConfig<T>) -> Result<RigidTransform<T>> {
        self.check_dim(q)?;
        let mut t = RigidTransform::identity();
        for (j, &qj) in self.joints.iter().zip(q.iter()) {
            t = t * j.parent_offset * j.motion(qj);
        }
        Ok(t * self.tip_offset)
    }

    /// World-frame position and axis of every joint, plus the tip transform.
    pub fn joint_frames(&self, q: &JointConfig<T>) -> Result<(Vec<(Point3<T>, Vector3<T>)>, RigidTransform<T>)> {
        self.check_dim(q)?;
        let mut frames = Vec::with_capacity(self.joints.len());
        let mut t = RigidTransform::identity();
        for (j, &qj) in self.joints.iter().zip(q.iter()) {
            t = t * j.parent_offset;
            frames.push((t.position(), t.transform_vector(j.axis.as_ref())));
            t = t * j.motion(qj);
        }
        Ok((frames, t * self.tip_offset))
    }

    /// Geometric Jacobian of the tip frame.
    pub fn jacobian(&self, q: &JointConfig<T>) -> Result<Jacobian<T>> {
        let (frames, tip) = self.joint_frames(q)?;
        let p_tip = tip.position();
        let mut jac = Jacobian::zeros(self.joints.len());
        for (c, (p, w)) in frames.iter().enumerate() {
            let lin = w.cross(&(p_tip - p));
            jac.fixed_view_mut::<3, 1>(0, c).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, c).copy_from(w);
        }
        Ok(jac)
    }

    pub fn clamp(&self, q: &JointConfig<T>) -> JointConfig<T> {
        JointConfig::from_iterator(q.len(), q.iter().zip(&self.joints).map(|(&v, j)| v.clamp(j.limits[0], j.limits[1])))
    }

    pub fn within_limits(&self, q: &JointConfig<T>) -> bool {
        q.len() == self.joints.len() && q.iter().zip(&self.joints).all(|(&v, j)| v >= j.limits[0] && v <= j.limits[1])
    }

    /// Midpoint of every joint range.
    pub fn mid_config(&self) -> JointConfig<T> {
        let two = T::one() + T::one();
        JointConfig::from_iterator(self.joints.len(), self.joints.iter().map(|j| (j.limits[0] + j.limits[1]) / two))
    }

    pub fn velocity_limits(&self) -> Vec<T> {
        self.joints.iter().map(|j| j.velocity_limit).collect()
    }

    /// Upper bound on tip distance from the first joint: sum of link lengths.
    pub fn reach(&self) -> T {
        let links = self.joints.iter().skip(1).fold(T::zero(), |acc, j| acc + j.parent_offset.translation().norm());
        links + self.tip_offset.translation().norm()
    }

    pub fn base_position(&self) -> Point3<T> {
        self.joints[0].parent_offset.position()
    }
}

/// Geodesic angle between two rotations, in `[0, pi]`.
pub fn rotation_geodesic_angle<T: Real>(r1: &Matrix3<T>, r2: &Matrix3<T>) -> T {
    let two = T::one() + T::one();
    let c = ((r1.transpose() * r2).trace() - T::one()) / two;
    c.clamp(-T::one(), T::one()).acos()
}

/// Rotation vector `w` with `exp([w]) = r`.
pub fn rotation_log<T: Real>(r: &Matrix3<T>) -> Vector3<T> {
    Rotation3::from_matrix_unchecked(*r).scaled_axis()
}
