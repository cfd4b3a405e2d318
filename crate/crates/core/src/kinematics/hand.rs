use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vector3};
use crate::scalar::{lit, Real};

use super::chain::{FingerChain, Joint};

pub const FINGER_NAMES: [&str; 5] = ["thumb", "index", "middle", "ring", "little"];

/// Five serial chains expressed in the palm frame.
///
/// Palm frame: x across the fingers, y along them, z out of the palm toward
/// a grasped object.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel<T: Real> {
    pub name: String,
    fingers: Vec<FingerChain<T>>,
}

impl<T: Real> HandModel<T> {
    pub fn new(name: impl Into<String>, fingers: Vec<FingerChain<T>>) -> Result<Self> {
        if fingers.len() != 5 {
            return Err(Error::Validation(format!("a hand has 5 fingers, got {}", fingers.len())));
        }
        Ok(Self { name: name.into(), fingers })
    }

    pub fn fingers(&self) -> &[FingerChain<T>] {
        &self.fingers
    }

    pub fn finger(&self, id: usize) -> Result<&FingerChain<T>> {
        self.fingers.get(id).ok_or(Error::IndexOutOfRange { index: id, len: self.fingers.len() })
    }

    pub fn total_dof(&self) -> usize {
        self.fingers.iter().map(|f| f.dof()).sum()
    }

    /// Synthetic desk-scale hand. Not a model of any real device.
    ///
    /// Fingers: abduction, knuckle flexion, middle flexion (distal joint
    /// folded into the tip link). Thumb: roll, abduction, two flexions.
    pub fn synthetic() -> Self {
        let v = |x: f64, y: f64, z: f64| Vector3::new(lit::<T>(x), lit(y), lit(z));
        let at = |x: f64, y: f64, z: f64| RigidTransform::from_translation(v(x, y, z));
        let joint = |off: RigidTransform<T>, axis: Vector3<T>, lo: f64, hi: f64| {
            Joint::new(off, axis, [lit(lo), lit(hi)], lit(3.0)).expect("synthetic joint is valid")
        };

        let mut fingers = Vec::with_capacity(5);
        let thumb = vec![
            joint(at(0.0, -0.005, 0.0), Vector3::y(), -0.6, 0.6),
            joint(RigidTransform::identity(), Vector3::z(), -0.5, 0.5),
            joint(at(0.0, 0.02, 0.0), Vector3::x(), -0.2, 1.7),
            joint(at(0.0, 0.035, 0.0), Vector3::x(), 0.0, 1.8),
        ];
        fingers.push(FingerChain::new("thumb", thumb, at(0.0, 0.03, 0.0)).expect("thumb"));
        for (name, x) in FINGER_NAMES[1..].iter().zip([0.033, 0.011, -0.011, -0.033]) {
            let chain = vec![
                joint(at(x, 0.08, 0.0), Vector3::z(), -0.3, 0.3),
                joint(RigidTransform::identity(), Vector3::x(), -0.3, 1.6),
                joint(at(0.0, 0.045, 0.0), Vector3::x(), 0.0, 2.1),
            ];
            fingers.push(FingerChain::new(*name, chain, at(0.0, 0.05, 0.0)).expect("finger"));
        }
        Self { name: "synthetic-5f".into(), fingers }
    }
}
