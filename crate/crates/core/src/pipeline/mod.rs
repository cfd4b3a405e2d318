//! Synthetic scenes, the end-to-end grasp pipeline and batch evaluation.
//!
//! Everything here works in `f64`.

pub mod batch;
pub mod config;
pub mod run;
pub mod scene;
pub mod seeds;
pub mod smoothing;
pub mod tactile;

pub use batch::{batch_evaluate, write_metrics_csv, BatchReport, MetricsRow};
pub use config::{BatchConfig, ExecutionConfig, PipelineConfig, SegmentationConfig, SuccessCriteria, SCHEMA_VERSION};
pub use run::{run_pipeline, run_scene, FailureReason, PipelineResult, PointCounts, StageTimings};
pub use scene::{synthesize_scene, CameraPlacement, CameraPreset, ObjectPose, ObjectShape, Scene, SceneConfig, SceneTruth};
pub use seeds::{on_boundary, patch_centroid, propose_tasks, SeedSearchConfig};
pub use smoothing::{smooth_and_clip, JointTrajectory};
pub use tactile::{tactile_signal, verify_contact, TactileSample};
