//! Repeated trials over many scenes with per-trial and aggregate metrics.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::HandModel;

use super::config::PipelineConfig;
use super::run::{run_pipeline, PipelineResult};
use super::scene::SceneConfig;

/// One metrics row. A per-trial row is the aggregate of a single trial, so
/// both kinds share this schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub object: String,
    pub camera: String,
    pub seed: u64,
    pub trials: usize,
    pub sa_percent: f64,
    pub gsr_percent: f64,
    pub pose_error_mm: f64,
    pub eta_empty: f64,
    pub failures: String,
    pub planning_ms_mean: f64,
    pub planning_ms_max: f64,
    pub ik_ms_mean: f64,
    pub latency_ms_mean: f64,
}

impl MetricsRow {
    /// Columns holding wall-clock measurements.
    pub const TIMING_COLUMNS: [&'static str; 4] = ["planning_ms_mean", "planning_ms_max", "ik_ms_mean", "latency_ms_mean"];

    pub fn aggregate(results: &[&PipelineResult]) -> Result<Self> {
        let first = results.first().ok_or(Error::EmptyInput)?;
        let n = results.len() as f64;
        let mean = |f: &dyn Fn(&PipelineResult) -> f64| results.iter().map(|r| f(r)).sum::<f64>() / n;
        let mut failures: Vec<&str> = results.iter().filter_map(|r| r.failure_reason.map(|f| f.as_str())).collect();
        failures.sort_unstable();
        let mut summary: Vec<String> = Vec::new();
        for f in &failures {
            let c = failures.iter().filter(|g| *g == f).count();
            let item = format!("{f}:{c}");
            if !summary.contains(&item) {
                summary.push(item);
            }
        }
        Ok(Self {
            object: first.object.clone(),
            camera: first.camera.clone(),
            seed: first.seed,
            trials: results.len(),
            sa_percent: mean(&|r| r.segmentation_accuracy),
            gsr_percent: 100.0 * results.iter().filter(|r| r.grasp_success).count() as f64 / n,
            pose_error_mm: mean(&|r| r.pose_estimation_error.unwrap_or(f64::NAN) * 1e3),
            eta_empty: mean(&|r| r.eta_empty.unwrap_or(f64::NAN)),
            failures: summary.join(";"),
            planning_ms_mean: mean(&|r| r.planning_time_ms),
            planning_ms_max: results.iter().map(|r| r.planning_time_ms).fold(0.0, f64::max),
            ik_ms_mean: mean(&|r| r.ik_time_ms),
            latency_ms_mean: mean(&|r| r.end_to_end_latency_ms),
        })
    }
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    /// Scene-major, trial-minor.
    pub results: Vec<PipelineResult>,
    pub trial_rows: Vec<MetricsRow>,
    /// One row per (object, camera) in first-seen order.
    pub aggregate_rows: Vec<MetricsRow>,
}

impl BatchReport {
    pub fn mean_segmentation_accuracy(&self) -> f64 {
        self.results.iter().map(|r| r.segmentation_accuracy).sum::<f64>() / self.results.len() as f64
    }

    pub fn grasp_success_rate(&self) -> f64 {
        100.0 * self.results.iter().filter(|r| r.grasp_success).count() as f64 / self.results.len() as f64
    }

    /// Mean over trials that produced an estimate, meters.
    pub fn mean_pose_error(&self) -> f64 {
        let v: Vec<f64> = self.results.iter().filter_map(|r| r.pose_estimation_error).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Runs `trials` seeds of every scene (trial `k` uses `scene.rng_seed + k`
/// for every random stream) in parallel, then aggregates.
pub fn batch_evaluate(scenes: &[SceneConfig], trials: usize, base: &PipelineConfig, hand: &HandModel<f64>) -> Result<BatchReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let jobs: Vec<PipelineConfig> = scenes
        .iter()
        .flat_map(|s| {
            (0..trials as u64).map(move |k| {
                let mut cfg = base.with_seed(s.rng_seed.wrapping_add(k));
                cfg.scene = SceneConfig { rng_seed: s.rng_seed.wrapping_add(k), ..*s };
                cfg
            })
        })
        .collect();
    let results = jobs.par_iter().map(|cfg| run_pipeline(cfg, hand)).collect::<Result<Vec<_>>>()?;

    let trial_rows = results.iter().map(|r| MetricsRow::aggregate(&[r])).collect::<Result<Vec<_>>>()?;
    let mut groups: Vec<((String, String), Vec<&PipelineResult>)> = Vec::new();
    for r in &results {
        let key = (r.object.clone(), r.camera.clone());
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let aggregate_rows = groups.iter().map(|(_, g)| MetricsRow::aggregate(g)).collect::<Result<Vec<_>>>()?;
    Ok(BatchReport { results, trial_rows, aggregate_rows })
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
