use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vector3};
use crate::kinematics::{FingerChain, HandModel, Joint};
use crate::scalar::{lit, to_f64, Real};

pub const HAND_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    /// Rotation row-major, then translation.
    pub offset: [f64; 12],
    pub axis: [f64; 3],
    pub limits: [f64; 2],
    pub vel_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerSpec {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub tip_offset: [f64; 12],
}

/// On-disk hand model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandFile {
    pub schema_version: u32,
    pub name: String,
    pub fingers: Vec<FingerSpec>,
}

fn transform<T: Real>(v: &[f64; 12], what: &str) -> Result<RigidTransform<T>> {
    let vals: [T; 12] = v.map(lit);
    RigidTransform::from_row_major(&vals).map_err(|e| Error::Validation(format!("{what}: {e}")))
}

impl HandFile {
    pub fn from_model<T: Real>(hand: &HandModel<T>) -> Self {
        let fingers = hand
            .fingers()
            .iter()
            .map(|f| FingerSpec {
                name: f.name.clone(),
                joints: f
                    .joints()
                    .iter()
                    .map(|j| {
                        let [lo, hi] = j.limits();
                        let a = j.axis();
                        JointSpec {
                            offset: j.parent_offset().to_row_major().map(to_f64),
                            axis: [to_f64(a.x), to_f64(a.y), to_f64(a.z)],
                            limits: [to_f64(lo), to_f64(hi)],
                            vel_limit: to_f64(j.velocity_limit()),
                        }
                    })
                    .collect(),
                tip_offset: f.tip_offset().to_row_major().map(to_f64),
            })
            .collect();
        Self { schema_version: HAND_SCHEMA_VERSION, name: hand.name.clone(), fingers }
    }

    /// Builds the model, checking every joint and chain invariant.
    pub fn to_model<T: Real>(&self) -> Result<HandModel<T>> {
        if self.schema_version != HAND_SCHEMA_VERSION {
            return Err(Error::Validation(format!("unsupported hand schema_version {}, expected {HAND_SCHEMA_VERSION}", self.schema_version)));
        }
        let mut fingers = Vec::with_capacity(self.fingers.len());
        for (fi, f) in self.fingers.iter().enumerate() {
            let mut joints = Vec::with_capacity(f.joints.len());
            for (ji, j) in f.joints.iter().enumerate() {
                let at = format!("finger {fi} ({}) joint {ji}", f.name);
                let offset = transform(&j.offset, &format!("{at} offset"))?;
                let axis = Vector3::new(lit(j.axis[0]), lit(j.axis[1]), lit(j.axis[2]));
                let joint = Joint::new(offset, axis, [lit(j.limits[0]), lit(j.limits[1])], lit(j.vel_limit)).map_err(|e| Error::Validation(format!("{at}: {e}")))?;
                joints.push(joint);
            }
            let tip = transform(&f.tip_offset, &format!("finger {fi} ({}) tip_offset", f.name))?;
            fingers.push(FingerChain::new(f.name.clone(), joints, tip).map_err(|e| Error::Validation(format!("finger {fi} ({}): {e}", f.name)))?);
        }
        HandModel::new(self.name.clone(), fingers)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::JointConfig;

    #[test]
    fn synthetic_hand_round_trips() {
        let hand = HandModel::<f64>::synthetic();
        let file = HandFile::from_model(&hand);
        let text = file.to_json().unwrap();
        let back: HandModel<f64> = HandFile::from_json(&text).unwrap().to_model().unwrap();
        assert_eq!(back, hand);
        let q = JointConfig::from_vec(vec![0.1, 0.2, 0.3]);
        assert_eq!(back.fingers()[2].forward_kinematics(&q).unwrap(), hand.fingers()[2].forward_kinematics(&q).unwrap());
    }

    #[test]
    fn invalid_models_are_rejected() {
        let good = HandFile::from_model(&HandModel::<f64>::synthetic());
        let mut bad_axis = good.clone();
        bad_axis.fingers[1].joints[0].axis = [0.0, 0.0, 2.0];
        let mut bad_limits = good.clone();
        bad_limits.fingers[0].joints[1].limits = [0.5, 0.5];
        let mut bad_rot = good.clone();
        bad_rot.fingers[3].tip_offset[0] = 2.0;
        let mut four = good.clone();
        four.fingers.pop();
        let mut version = good.clone();
        version.schema_version = 9;
        let mut empty = good;
        empty.fingers[4].joints.clear();
        for f in [bad_axis, bad_limits, bad_rot, four, version, empty] {
            assert!(matches!(f.to_model::<f64>(), Err(Error::Validation(_))), "{f:?}");
        }
        assert!(HandFile::from_json(r#"{"schema_version": 1, "name": "x", "fingers": [], "extra": 1}"#).is_err());
    }
}
