//! Per-finger grasp planning over point clouds.
//!
//! The numeric modules (`geometry`, `perception`, `kinematics`, `planner`)
//! are generic over [`Real`] (`f32` or `f64`); the aliases below fix the
//! common types to one precision. `pipeline` and `io` glue everything into
//! synthetic-scene experiments and work in `f64`.

pub mod error;
pub mod geometry;
pub mod io;
pub mod kinematics;
pub mod perception;
pub mod pipeline;
pub mod planner;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Aabb = geometry::Aabb<f64>;
pub type Aabb32 = geometry::Aabb<f32>;
pub type Ray = geometry::Ray<f64>;
pub type Ray32 = geometry::Ray<f32>;
pub type RigidTransform = geometry::RigidTransform<f64>;
pub type RigidTransform32 = geometry::RigidTransform<f32>;
pub type PointCloud = geometry::PointCloud<f64>;
pub type PointCloud32 = geometry::PointCloud<f32>;
pub type Bvh = perception::Bvh<f64>;
pub type Bvh32 = perception::Bvh<f32>;
pub type FingerChain = kinematics::FingerChain<f64>;
pub type FingerChain32 = kinematics::FingerChain<f32>;
pub type HandModel = kinematics::HandModel<f64>;
pub type HandModel32 = kinematics::HandModel<f32>;
pub type RrtConfig = planner::RrtConfig<f64>;
pub type RrtConfig32 = planner::RrtConfig<f32>;
pub type FingerTrajectory = planner::FingerTrajectory<f64>;
pub type FingerTrajectory32 = planner::FingerTrajectory<f32>;
