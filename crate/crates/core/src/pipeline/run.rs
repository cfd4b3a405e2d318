//! End-to-end run: preprocess, segment, plan, solve, execute and judge.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{empty_space_ratio, Aabb, Point3, PointCloud};
use crate::kinematics::{dls_ik, HandModel, JointConfig};
use crate::perception::{estimate_normals_with, grow_region, preprocess, seed_near, segmentation_accuracy, Bvh, Removal, DEFAULT_LEAF_CAPACITY};
use crate::planner::{min_pairwise_separation, plan_hand, replan_relaxed, FailureStage, FingerPlan, GraspHypothesis, PlanningScene, Relaxation};

use super::config::PipelineConfig;
use super::scene::{synthesize_scene, Scene};
use super::seeds::propose_tasks;
use super::smoothing::{smooth_and_clip, JointTrajectory};
use super::tactile::{tactile_signal, verify_contact, TactileSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Preprocess,
    Segmentation,
    NoTrajectoryFound,
    IkNotConverged,
    Separation,
    Consistency,
    ContactTolerance,
    Penetration,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::Preprocess => "preprocess",
            FailureReason::Segmentation => "segmentation",
            FailureReason::NoTrajectoryFound => "no_trajectory_found",
            FailureReason::IkNotConverged => "ik_not_converged",
            FailureReason::Separation => "separation",
            FailureReason::Consistency => "consistency",
            FailureReason::ContactTolerance => "contact_tolerance",
            FailureReason::Penetration => "penetration",
        }
    }
}

impl From<FailureStage> for FailureReason {
    fn from(s: FailureStage) -> Self {
        match s {
            FailureStage::Trajectory => FailureReason::NoTrajectoryFound,
            FailureStage::InverseKinematics => FailureReason::IkNotConverged,
            FailureStage::Separation => FailureReason::Separation,
            FailureStage::Consistency => FailureReason::Consistency,
        }
    }
}

/// Wall time per stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub preprocess_ms: f64,
    pub segmentation_ms: f64,
    pub perception_ms: f64,
    pub seeds_ms: f64,
    pub planning_ms: f64,
    pub execution_ms: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointCounts {
    pub total: usize,
    pub kept: usize,
    pub segmented: usize,
    pub object_truth: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineResult {
    pub object: String,
    pub camera: String,
    pub seed: u64,
    /// Percent of true object points recovered by segmentation.
    pub segmentation_accuracy: f64,
    pub grasp_success: bool,
    /// Per finger, gap between the planned fingertip sphere and the true
    /// surface in meters (negative when penetrating).
    pub contact_distances: Vec<Option<f64>>,
    pub tactile_confirmed: Vec<bool>,
    pub planning_time_ms: f64,
    /// Mean wall time of one per-finger IK solve.
    pub ik_time_ms: f64,
    pub end_to_end_latency_ms: f64,
    pub timings: StageTimings,
    pub eta_empty: Option<f64>,
    /// Distance from the segmented-cloud AABB center to the true centroid.
    pub pose_estimation_error: Option<f64>,
    pub estimated_center: Option<[f64; 3]>,
    pub min_fingertip_separation: Option<f64>,
    pub failure_reason: Option<FailureReason>,
    pub failure_detail: Option<String>,
    pub relaxations: Vec<Relaxation>,
    pub counts: PointCounts,
    #[serde(skip)]
    pub hypothesis: Option<GraspHypothesis<f64>>,
    #[serde(skip)]
    pub joint_trajectories: Vec<JointTrajectory>,
    /// Indices into the input cloud kept by segmentation.
    #[serde(skip)]
    pub segmented: Vec<usize>,
    /// Cleaned object points and obstacle boxes the planner saw.
    #[serde(skip)]
    pub object_cloud: Vec<Point3<f64>>,
    #[serde(skip)]
    pub obstacles: Vec<Aabb<f64>>,
}

impl PipelineResult {
    fn empty(scene: &Scene, cfg: &PipelineConfig, fingers: usize) -> Self {
        Self {
            object: cfg.scene.object.label().to_string(),
            camera: cfg.scene.camera.label(),
            seed: cfg.scene.rng_seed,
            segmentation_accuracy: 0.0,
            grasp_success: false,
            contact_distances: vec![None; fingers],
            tactile_confirmed: vec![false; fingers],
            planning_time_ms: 0.0,
            ik_time_ms: 0.0,
            end_to_end_latency_ms: 0.0,
            timings: StageTimings::default(),
            eta_empty: None,
            pose_estimation_error: None,
            estimated_center: None,
            min_fingertip_separation: None,
            failure_reason: None,
            failure_detail: None,
            relaxations: Vec::new(),
            counts: PointCounts { total: scene.cloud.len(), object_truth: scene.object_indices().len(), ..PointCounts::default() },
            hypothesis: None,
            joint_trajectories: Vec::new(),
            segmented: Vec::new(),
            object_cloud: Vec::new(),
            obstacles: Vec::new(),
        }
    }

    fn fail(mut self, reason: FailureReason, detail: impl Into<String>, began: Instant) -> Self {
        self.failure_reason = Some(reason);
        self.failure_detail = Some(detail.into());
        self.end_to_end_latency_ms = ms(began);
        self
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Synthesizes the configured scene and runs it. Errors only on invalid
/// configuration; every runtime failure is reported in the result.
pub fn run_pipeline(cfg: &PipelineConfig, hand: &HandModel<f64>) -> Result<PipelineResult> {
    cfg.validate()?;
    let scene = synthesize_scene(&cfg.scene)?;
    run_scene(&scene, cfg, hand)
}

/// Runs perception, planning and simulated execution on a prepared scene.
pub fn run_scene(scene: &Scene, cfg: &PipelineConfig, hand: &HandModel<f64>) -> Result<PipelineResult> {
    cfg.validate()?;
    cfg.seeds.validate(hand)?;
    let began = Instant::now();
    let fingers = hand.fingers().len();
    let mut res = PipelineResult::empty(scene, cfg, fingers);
    let truth_idx = scene.object_indices();

    let t = Instant::now();
    let pre = match preprocess(&scene.cloud, &cfg.preprocess) {
        Ok(p) => p,
        Err(e) => return Ok(res.fail(FailureReason::Preprocess, e.to_string(), began)),
    };
    res.timings.preprocess_ms = ms(t);
    res.counts.kept = pre.kept.len();

    let t = Instant::now();
    let full = Bvh::build(&pre.cloud, DEFAULT_LEAF_CAPACITY)?;
    let target = match (cfg.segmentation.seed, &cfg.preprocess.crop_box) {
        (Some(s), _) => Point3::from(s),
        (None, Some(b)) => b.center(),
        (None, None) => full.bounds().center(),
    };
    let region = grow_region(&full, seed_near(&full, &target), cfg.segmentation.radius)?;
    res.timings.segmentation_ms = ms(t);
    res.segmented = region.iter().map(|&i| pre.kept[i]).collect();
    res.counts.segmented = region.len();
    res.segmentation_accuracy = segmentation_accuracy(&res.segmented, &truth_idx);
    if region.len() < cfg.segmentation.min_points.max(cfg.segmentation.normals_k) {
        let detail = format!("region of {} points is below the minimum of {}", region.len(), cfg.segmentation.min_points);
        return Ok(res.fail(FailureReason::Segmentation, detail, began));
    }

    let t = Instant::now();
    let object = pre.cloud.select(&region);
    let bounds = Aabb::from_cloud(&object)?;
    let center = bounds.center();
    res.estimated_center = Some([center.x, center.y, center.z]);
    res.pose_estimation_error = Some((center - scene.truth.centroid).norm());
    res.eta_empty = Some(empty_space_ratio(&object, &bounds)?.eta);
    let bvh = Bvh::build(&object, DEFAULT_LEAF_CAPACITY)?;
    let normals = estimate_normals_with(&bvh, cfg.segmentation.normals_k, &scene.camera)?;
    let obstacles = support_obstacle(&scene.cloud, &pre.removal);
    res.timings.perception_ms = ms(t);
    res.object_cloud = object.points.clone();
    res.obstacles = obstacles.clone();

    let t = Instant::now();
    let tasks = propose_tasks(hand, &bvh, &normals, &obstacles, &cfg.planner, &cfg.seeds)?;
    res.timings.seeds_ms = ms(t);

    let t = Instant::now();
    let planning = PlanningScene { bvh: &bvh, normals: &normals, obstacles: &obstacles };
    let mut hyp = plan_hand(&tasks, &planning, hand, &cfg.planner)?;
    let mut planning_ms = hyp.planning_ms;
    if !hyp.feasible && cfg.replan {
        let relaxed = replan_relaxed(&hyp, &planning, hand)?;
        planning_ms += relaxed.planning_ms;
        hyp = relaxed;
    }
    res.timings.planning_ms = ms(t);
    res.planning_time_ms = planning_ms;
    res.ik_time_ms = hyp.ik_ms;
    res.relaxations = hyp.relaxations.clone();
    res.min_fingertip_separation = min_pairwise_separation(&hyp);

    let r = cfg.planner.rrt.fingertip_radius;
    for p in &hyp.fingers {
        res.contact_distances[p.finger_id] = p.tip().map(|tip| scene.truth.signed_distance(&tip) - r);
    }

    let t = Instant::now();
    let mut samples = Vec::new();
    for p in hyp.fingers.iter().filter(|p| p.converged) {
        let chain = hand.finger(p.finger_id)?;
        let raw = joint_path(p, &hyp, hand, cfg)?;
        let smooth = smooth_and_clip(&raw, &chain.velocity_limits(), cfg.execution.dt)?;
        for (time, q) in smooth.times.iter().zip(&smooth.positions) {
            let tip = chain.forward_kinematics(&JointConfig::from_column_slice(q))?.position();
            let gap = scene.truth.signed_distance(&tip) - r;
            samples.push(TactileSample { finger_id: p.finger_id, c: tactile_signal(gap, cfg.success.contact_tolerance), t: *time });
        }
        res.joint_trajectories.push(smooth);
    }
    res.tactile_confirmed = verify_contact(&samples, cfg.success.c_thresh, fingers)?;
    res.timings.execution_ms = ms(t);

    let feasible = hyp.feasible;
    let failure = hyp.failure;
    let detail = hyp.failure_detail.clone();
    res.hypothesis = Some(hyp);
    if !feasible {
        let reason = failure.map(FailureReason::from).unwrap_or(FailureReason::NoTrajectoryFound);
        return Ok(res.fail(reason, detail.unwrap_or_default(), began));
    }
    let gaps: Vec<f64> = res.contact_distances.iter().map(|d| d.unwrap_or(f64::INFINITY)).collect();
    if let Some((f, d)) = gaps.iter().enumerate().find(|(_, d)| -**d > cfg.success.penetration_tolerance) {
        return Ok(res.fail(FailureReason::Penetration, format!("finger {f} penetrates the surface by {:.2} mm", -d * 1e3), began));
    }
    if let Some((f, d)) = gaps.iter().enumerate().find(|(_, d)| **d > cfg.success.contact_tolerance) {
        return Ok(res.fail(FailureReason::ContactTolerance, format!("finger {f} stops {:.2} mm from the surface", d * 1e3), began));
    }
    res.grasp_success = true;
    res.end_to_end_latency_ms = ms(began);
    Ok(res)
}

/// Thin box around the removed support plane, used as a planning obstacle.
fn support_obstacle(cloud: &PointCloud<f64>, removal: &[Removal]) -> Vec<Aabb<f64>> {
    let pts: Vec<Point3<f64>> = cloud.points.iter().zip(removal).filter(|(_, r)| **r == Removal::Plane).map(|(p, _)| *p).collect();
    match Aabb::from_points(&pts) {
        Ok(b) if b.edge_lengths().min() < 0.02 => vec![b],
        _ => Vec::new(),
    }
}

/// Joint-space path through the selected trajectory: per-waypoint IK warm
/// started from the previous waypoint, ending on the planned solution.
fn joint_path(plan: &FingerPlan<f64>, hyp: &GraspHypothesis<f64>, hand: &HandModel<f64>, cfg: &PipelineConfig) -> Result<JointTrajectory> {
    let chain = hand.finger(plan.finger_id)?;
    let sel = plan.selection.ok_or(Error::NoCandidates)?;
    let ik = plan.ik.as_ref().ok_or(Error::NoCandidates)?;
    let waypoints = &plan.trajectories[sel.trajectory].waypoints[..=sel.waypoint];
    let mut q = JointConfig::from_column_slice(&cfg.seeds.open_pose[plan.finger_id]);
    let mut times = vec![0.0];
    let mut positions = vec![q.as_slice().to_vec()];
    let mut settings = hyp.config.ik;
    settings.max_iters = settings.max_iters.min(50);
    for (i, w) in waypoints.iter().enumerate().skip(1) {
        let target = crate::geometry::RigidTransform::from_translation(w.coords);
        q = if i + 1 == waypoints.len() { ik.q.clone() } else { dls_ik(chain, &target, &settings, &q)?.q };
        let step = (w - waypoints[i - 1]).norm() / cfg.execution.fingertip_speed;
        times.push(times[i - 1] + step.max(1e-6));
        positions.push(q.as_slice().to_vec());
    }
    JointTrajectory::new(plan.finger_id, times, positions)
}
