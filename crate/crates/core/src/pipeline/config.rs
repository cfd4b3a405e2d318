//! JSON-facing configuration for single runs and batches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};
use crate::perception::PreprocessConfig;
use crate::planner::HandPlanConfig;

use super::scene::{CameraPlacement, CameraPreset, ObjectShape, SceneConfig};
use super::seeds::SeedSearchConfig;

pub const SCHEMA_VERSION: u32 = 1;

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Validation(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    /// Region-growing neighbor radius.
    pub radius: f64,
    /// Seed location; defaults to the crop-box center.
    pub seed: Option<[f64; 3]>,
    /// Regions smaller than this count as a segmentation failure.
    pub min_points: usize,
    pub normals_k: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self { radius: 0.006, seed: None, min_points: 50, normals_k: 12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuccessCriteria {
    pub contact_tolerance: f64,
    pub penetration_tolerance: f64,
    pub c_thresh: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        Self { contact_tolerance: 0.005, penetration_tolerance: 0.002, c_thresh: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionConfig {
    /// Nominal Cartesian fingertip speed used to time waypoints.
    pub fingertip_speed: f64,
    /// Resampling step of the smoothed joint trajectories.
    pub dt: f64,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self { fingertip_speed: 0.05, dt: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub scene: SceneConfig,
    pub preprocess: PreprocessConfig<f64>,
    pub segmentation: SegmentationConfig,
    pub planner: HandPlanConfig<f64>,
    pub seeds: SeedSearchConfig,
    pub success: SuccessCriteria,
    pub execution: ExecutionConfig,
    /// Run one relaxed replanning round when the first plan is infeasible.
    pub replan: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut planner = HandPlanConfig::default();
        planner.rrt.clearance = 0.02;
        let preprocess = PreprocessConfig {
            crop_box: Some(Aabb::new(Point3::new(-0.12, -0.03, -0.06), Point3::new(0.12, 0.20, 0.12)).expect("ordered corners")),
            denoise_k: 24,
            plane_distance_threshold: 0.003,
            ..PreprocessConfig::default()
        };
        Self {
            schema_version: SCHEMA_VERSION,
            scene: SceneConfig::default(),
            preprocess,
            segmentation: SegmentationConfig::default(),
            planner,
            seeds: SeedSearchConfig::default(),
            success: SuccessCriteria::default(),
            execution: ExecutionConfig::default(),
            replan: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        self.scene.validate()?;
        self.preprocess.validate()?;
        self.planner.validate()?;
        let s = &self.segmentation;
        if !(s.radius > 0.0) || s.normals_k < 3 {
            return Err(Error::Validation("segmentation radius must be positive and normals_k at least 3".into()));
        }
        let c = &self.success;
        if !(c.contact_tolerance > 0.0 && c.penetration_tolerance >= 0.0 && c.c_thresh > 0.0) {
            return Err(Error::Validation("success tolerances must be positive".into()));
        }
        let e = &self.execution;
        if !(e.fingertip_speed > 0.0 && e.dt > 0.0) {
            return Err(Error::Validation("execution speed and dt must be positive".into()));
        }
        Ok(())
    }

    /// Copy with every random stream derived from `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.scene.rng_seed = seed;
        c.preprocess.rng_seed = seed;
        c.planner.rrt.rng_seed = seed;
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Objects x cameras x trials sweep sharing one pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub schema_version: u32,
    pub objects: Vec<ObjectShape>,
    pub cameras: Vec<CameraPlacement>,
    pub trials: usize,
    pub base_seed: u64,
    pub pipeline: PipelineConfig,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            objects: vec![ObjectShape::default(), ObjectShape::default_block()],
            cameras: CameraPreset::STANDARD.iter().map(|p| CameraPlacement::Preset(*p)).collect(),
            trials: 5,
            base_seed: 0,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        if self.objects.is_empty() || self.cameras.is_empty() {
            return Err(Error::Validation("a batch needs at least one object and one camera".into()));
        }
        if self.trials == 0 {
            return Err(Error::Validation("trials must be at least 1".into()));
        }
        self.pipeline.validate()?;
        for s in self.scenes() {
            s.validate()?;
        }
        Ok(())
    }

    /// Scene per (object, camera), object-major. Seeds start at `base_seed`.
    pub fn scenes(&self) -> Vec<SceneConfig> {
        let mut out = Vec::new();
        for object in &self.objects {
            for camera in &self.cameras {
                out.push(SceneConfig { object: *object, camera: *camera, rng_seed: self.base_seed, ..self.pipeline.scene });
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), cfg);
        let batch = BatchConfig::default();
        batch.validate().unwrap();
        assert_eq!(batch.scenes().len(), 6);
    }

    #[test]
    fn omitted_fields_take_defaults() {
        let cfg = PipelineConfig::from_json(r#"{"schema_version": 1, "scene": {"camera": "top"}}"#).unwrap();
        assert_eq!(cfg.scene.camera, CameraPlacement::Preset(CameraPreset::Top));
        assert_eq!(cfg.planner, PipelineConfig::default().planner);
        let explicit = PipelineConfig::from_json(r#"{"scene": {"camera": [0.1, 0.2, -0.3]}}"#).unwrap();
        assert_eq!(explicit.scene.camera, CameraPlacement::Position([0.1, 0.2, -0.3]));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        assert!(matches!(PipelineConfig::from_json(r#"{"schema_version": 7}"#), Err(Error::Validation(_))));
        assert!(matches!(PipelineConfig::from_json("{ not json"), Err(Error::Json(_))));
        assert!(matches!(BatchConfig::from_json(r#"{"trials": 0}"#), Err(Error::Validation(_))));
    }
}
