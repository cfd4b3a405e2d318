//! File formats: ASCII PLY and CSV clouds, the hand-model JSON and
//! trajectory exports.

mod cloud;
mod hand;
mod trajectory;

pub use cloud::{read_cloud, read_csv, read_ply, write_cloud, write_csv, write_ply};
pub use hand::{HandFile, JointSpec, FingerSpec, HAND_SCHEMA_VERSION};
pub use trajectory::{write_trajectory_csv, write_trajectory_ply};
