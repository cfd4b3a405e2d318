//! Serial finger chains, the hand model and damped least-squares IK.

pub mod chain;
pub mod hand;
pub mod ik;

pub use chain::{rotation_geodesic_angle, rotation_log, FingerChain, Jacobian, Joint, JointConfig};
pub use hand::{HandModel, FINGER_NAMES};
pub use ik::{dls_ik, IkSettings, IkSolution};
