//! Joint planning of all five fingers: per-finger search, separation and
//! consistency passes, constrained re-sampling and relaxed replanning.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{aabb_overlap, Aabb, Point3, RigidTransform, Vector3};
use crate::kinematics::{dls_ik, HandModel, IkSettings, IkSolution, JointConfig};
use crate::perception::{Bvh, NormalField};
use crate::scalar::{lit, to_f64, Real};

use super::rrt::{rrt_star, FingerTrajectory, GraspSeed, RrtConfig, RrtStats};
use super::scoring::{approach_frame, score_endpoint, CandidateEndpoint, PlannerWeights};
use super::select::{select_endpoint, Selection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandPlanConfig<T: Real> {
    pub rrt: RrtConfig<T>,
    pub ik: IkSettings<T>,
    pub weights: PlannerWeights<T>,
    /// Minimum distance between fingertip centers.
    pub min_sep: T,
    pub max_resample: usize,
    /// Plan fingers on separate threads.
    pub parallel: bool,
}

impl<T: Real> Default for HandPlanConfig<T> {
    fn default() -> Self {
        Self {
            rrt: RrtConfig::default(),
            // Three-joint fingers cannot servo orientation; position only.
            ik: IkSettings { w_theta: T::zero(), pos_tol: lit(1e-3), ang_tol: lit(4.0), ..IkSettings::default() },
            weights: PlannerWeights::default(),
            min_sep: lit(0.015),
            max_resample: 3,
            parallel: true,
        }
    }
}

impl<T: Real> HandPlanConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.rrt.validate()?;
        self.ik.validate()?;
        self.weights.validate()?;
        if !(self.min_sep >= T::zero()) {
            return Err(Error::InvalidArgument("min_sep must be non-negative".into()));
        }
        Ok(())
    }
}

/// What one finger should do: reach `seed` from `start`, with `q_warm` as the
/// IK initial guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerTask<T: Real> {
    pub seed: GraspSeed<T>,
    pub start: Point3<T>,
    pub q_warm: JointConfig<T>,
}

/// Shared read-only perception data.
#[derive(Clone, Copy)]
pub struct PlanningScene<'a, T: Real> {
    pub bvh: &'a Bvh<T>,
    pub normals: &'a NormalField<T>,
    pub obstacles: &'a [Aabb<T>],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerFailure {
    NoTrajectoryFound,
    Precondition(String),
    IkNotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    Trajectory,
    InverseKinematics,
    Separation,
    Consistency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    GoalTolerance,
    TimeBudget,
    DropKappa,
}

impl Relaxation {
    pub const ORDER: [Relaxation; 3] = [Relaxation::GoalTolerance, Relaxation::TimeBudget, Relaxation::DropKappa];

    pub fn apply<T: Real>(self, cfg: &mut HandPlanConfig<T>) {
        match self {
            Relaxation::GoalTolerance => cfg.rrt.goal_tolerance *= lit(2.0),
            Relaxation::TimeBudget => cfg.rrt.time_budget_ms = cfg.rrt.time_budget_ms.saturating_mul(2),
            Relaxation::DropKappa => cfg.weights.gamma = T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerPlan<T: Real> {
    pub finger_id: usize,
    /// Seed actually planned (differs from the task after re-sampling).
    pub seed: GraspSeed<T>,
    pub trajectories: Vec<FingerTrajectory<T>>,
    pub selection: Option<Selection<T>>,
    pub endpoint: Option<CandidateEndpoint<T>>,
    /// Planned pad contact: fingertip center plus one radius along the
    /// approach.
    pub contact: Option<Point3<T>>,
    pub ik: Option<IkSolution<T>>,
    pub converged: bool,
    pub failure: Option<FingerFailure>,
    pub stats: Option<RrtStats>,
    pub resamples: usize,
    pub planning_ms: f64,
    pub ik_ms: f64,
}

impl<T: Real> FingerPlan<T> {
    pub fn trajectory(&self) -> Option<&FingerTrajectory<T>> {
        self.selection.map(|s| &self.trajectories[s.trajectory])
    }

    /// Fingertip center at the selected waypoint.
    pub fn tip(&self) -> Option<Point3<T>> {
        self.selection.map(|s| self.trajectories[s.trajectory].waypoints[s.waypoint])
    }

    fn score(&self) -> T {
        self.endpoint.map(|e| e.score).unwrap_or_else(|| lit(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspHypothesis<T: Real> {
    pub fingers: Vec<FingerPlan<T>>,
    pub aggregate_score: T,
    pub feasible: bool,
    pub failure: Option<FailureStage>,
    pub failure_detail: Option<String>,
    pub resample_rounds: usize,
    pub relaxations: Vec<Relaxation>,
    pub planning_ms: f64,
    /// Mean wall time per IK solve.
    pub ik_ms: f64,
    pub tasks: Vec<FingerTask<T>>,
    pub config: HandPlanConfig<T>,
}

fn plan_finger<T: Real>(
    finger_id: usize,
    seed: GraspSeed<T>,
    task: &FingerTask<T>,
    scene: &PlanningScene<'_, T>,
    hand: &HandModel<T>,
    cfg: &HandPlanConfig<T>,
    resamples: usize,
) -> FingerPlan<T> {
    let began = Instant::now();
    let mut plan = FingerPlan {
        finger_id,
        seed,
        trajectories: Vec::new(),
        selection: None,
        endpoint: None,
        contact: None,
        ik: None,
        converged: false,
        failure: None,
        stats: None,
        resamples,
        planning_ms: 0.0,
        ik_ms: 0.0,
    };
    let outcome = rrt_star(&task.start, &seed, scene.bvh, scene.obstacles, &cfg.rrt, finger_id);
    plan.planning_ms = began.elapsed().as_secs_f64() * 1e3;
    let outcome = match outcome {
        Ok(o) => o,
        Err(Error::Precondition(m)) => {
            plan.failure = Some(FingerFailure::Precondition(m));
            return plan;
        }
        Err(_) => {
            plan.failure = Some(FingerFailure::NoTrajectoryFound);
            return plan;
        }
    };
    plan.stats = Some(outcome.stats);
    plan.trajectories = outcome.trajectories;
    let sel = match select_endpoint(&plan.trajectories, scene.bvh) {
        Ok(s) => s,
        Err(_) => {
            plan.failure = Some(FingerFailure::NoTrajectoryFound);
            return plan;
        }
    };
    plan.selection = Some(sel);
    let tip = plan.trajectories[sel.trajectory].waypoints[sel.waypoint];
    let a = seed.approach.into_inner();
    let contact = tip + a * cfg.rrt.fingertip_radius;
    plan.contact = Some(contact);
    plan.endpoint = score_endpoint(&contact, &a, scene.bvh, scene.normals, &cfg.weights, cfg.rrt.fingertip_radius, cfg.rrt.clearance)
        .ok()
        .map(|mut e| {
            e.position = tip;
            e
        });

    let ik_began = Instant::now();
    let target = RigidTransform::new(approach_frame(&a), tip.coords).unwrap_or_else(|_| RigidTransform::from_translation(tip.coords));
    let chain = hand.finger(finger_id).expect("finger id checked by caller");
    match dls_ik(chain, &target, &cfg.ik, &task.q_warm) {
        Ok(sol) => {
            plan.converged = sol.converged;
            plan.ik = Some(sol);
        }
        Err(e) => log::warn!("finger {finger_id}: ik rejected input: {e}"),
    }
    plan.ik_ms = ik_began.elapsed().as_secs_f64() * 1e3;
    if !plan.converged {
        plan.failure = Some(FingerFailure::IkNotConverged);
    }
    plan
}

fn run_fingers<T: Real>(
    jobs: &[(usize, GraspSeed<T>, usize)],
    tasks: &[FingerTask<T>],
    scene: &PlanningScene<'_, T>,
    hand: &HandModel<T>,
    cfg: &HandPlanConfig<T>,
) -> Vec<FingerPlan<T>> {
    if !cfg.parallel || jobs.len() < 2 {
        return jobs.iter().map(|&(id, seed, k)| plan_finger(id, seed, &tasks[id], scene, hand, cfg, k)).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> =
            jobs.iter().map(|&(id, seed, k)| s.spawn(move || plan_finger(id, seed, &tasks[id], scene, hand, cfg, k))).collect();
        handles.into_iter().map(|h| h.join().expect("finger planning thread panicked")).collect()
    })
}

/// Shifts a seed sideways by `distance` along `dir` (projected off the
/// approach axis) and snaps it back onto the cloud.
pub fn resample_seed<T: Real>(seed: &GraspSeed<T>, dir: &Vector3<T>, distance: T, bvh: &Bvh<T>, normals: &NormalField<T>, radius: T) -> GraspSeed<T> {
    let a = seed.approach.into_inner();
    let mut side = dir - a * dir.dot(&a);
    if side.norm() < lit(1e-9) {
        side = approach_frame(&a).column(0).into_owned();
    }
    let probe = seed.t + side.normalize() * distance;
    let hit = bvh.nearest(&probe);
    let patch = bvh.radius_search(&bvh.points()[hit.index], radius);
    let n = lit::<T>(patch.len() as f64);
    let centroid = patch.iter().fold(Vector3::zeros(), |acc, &i| acc + bvh.points()[i].coords) / n;
    let normal = normals.normals[hit.index];
    GraspSeed::new(Point3::from(centroid), -normal).unwrap_or(*seed)
}

fn golden_direction<T: Real>(seed: &GraspSeed<T>, k: usize) -> Vector3<T> {
    let frame = approach_frame(&seed.approach.into_inner());
    let th = lit::<T>(2.399_963_229_728_653 * k as f64);
    frame.column(0) * th.cos() + frame.column(1) * th.sin()
}

struct Conflicts {
    stage: Option<FailureStage>,
    detail: String,
    /// Finger to re-sample and the finger it clashes with, if any.
    retry: Vec<(usize, Option<usize>)>,
}

fn audit<T: Real>(plans: &[FingerPlan<T>], scene: &PlanningScene<'_, T>, cfg: &HandPlanConfig<T>) -> Conflicts {
    let mut c = Conflicts { stage: None, detail: String::new(), retry: Vec::new() };
    let traj: Vec<usize> = plans.iter().filter(|p| p.selection.is_none()).map(|p| p.finger_id).collect();
    if !traj.is_empty() {
        c.stage = Some(FailureStage::Trajectory);
        c.detail = format!("no trajectory for fingers {traj:?}");
        c.retry = traj.into_iter().map(|f| (f, None)).collect();
        return c;
    }
    let ik: Vec<usize> = plans.iter().filter(|p| !p.converged).map(|p| p.finger_id).collect();
    if !ik.is_empty() {
        c.stage = Some(FailureStage::InverseKinematics);
        c.detail = format!("ik did not converge for fingers {ik:?}");
        c.retry = ik.into_iter().map(|f| (f, None)).collect();
        return c;
    }

    let tips: Vec<Point3<T>> = plans.iter().map(|p| p.tip().expect("selection present")).collect();
    let mut sep = Vec::new();
    for i in 0..plans.len() {
        for j in i + 1..plans.len() {
            if (tips[i] - tips[j]).norm() < cfg.min_sep {
                sep.push((i, j));
            }
        }
    }
    if !sep.is_empty() {
        c.stage = Some(FailureStage::Separation);
        c.detail = format!("fingertips closer than min_sep: {:?}", sep.iter().map(|&(i, j)| (plans[i].finger_id, plans[j].finger_id)).collect::<Vec<_>>());
        c.retry = demote(plans, &sep);
        return c;
    }

    let r = cfg.rrt.fingertip_radius;
    let boxes: Vec<Aabb<T>> = tips.iter().map(|t| Aabb::from_point(*t).inflate(r).expect("radius validated")).collect();
    let mut hits: Vec<(usize, Option<usize>)> = Vec::new();
    for (i, p) in plans.iter().enumerate() {
        let contact = p.contact.expect("selection present");
        let patch2 = (r * lit(2.0)).powi(2);
        let pts = scene.bvh.points();
        if scene.bvh.points_in_box(&boxes[i]).iter().any(|&k| (pts[k] - contact).norm_squared() > patch2) {
            hits.push((i, None));
        }
    }
    let mut overlaps = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if aabb_overlap(&boxes[i], &boxes[j]) {
                overlaps.push((i, j));
            }
        }
    }
    if !hits.is_empty() || !overlaps.is_empty() {
        c.stage = Some(FailureStage::Consistency);
        c.detail = format!(
            "fingertip boxes hit the object away from contact for {:?}; overlapping pairs {:?}",
            hits.iter().map(|&(i, _)| plans[i].finger_id).collect::<Vec<_>>(),
            overlaps.iter().map(|&(i, j)| (plans[i].finger_id, plans[j].finger_id)).collect::<Vec<_>>()
        );
        c.retry = hits.into_iter().map(|(i, _)| (plans[i].finger_id, None)).collect();
        for (f, other) in demote(plans, &overlaps) {
            if !c.retry.iter().any(|r| r.0 == f) {
                c.retry.push((f, other));
            }
        }
    }
    c
}

/// Lower-scored member of each conflicting pair (ties demote the higher id).
fn demote<T: Real>(plans: &[FingerPlan<T>], pairs: &[(usize, usize)]) -> Vec<(usize, Option<usize>)> {
    let mut out: Vec<(usize, Option<usize>)> = Vec::new();
    for &(i, j) in pairs {
        let (lose, keep) = if plans[i].score() < plans[j].score() { (i, j) } else { (j, i) };
        let f = plans[lose].finger_id;
        if !out.iter().any(|o| o.0 == f) {
            out.push((f, Some(plans[keep].finger_id)));
        }
    }
    out
}

/// Plans all fingers, then enforces separation and consistency with up to
/// `max_resample` rounds of sideways seed re-sampling. A demoted finger moves
/// away from the finger it clashes with; coincident contacts fall back to the
/// offset between the two fingers' start points.
pub fn plan_hand<T: Real>(tasks: &[FingerTask<T>], scene: &PlanningScene<'_, T>, hand: &HandModel<T>, cfg: &HandPlanConfig<T>) -> Result<GraspHypothesis<T>> {
    cfg.validate()?;
    if tasks.len() != hand.fingers().len() {
        return Err(Error::Dimension { expected: hand.fingers().len(), got: tasks.len() });
    }
    if scene.normals.normals.len() != scene.bvh.len() {
        return Err(Error::Dimension { expected: scene.bvh.len(), got: scene.normals.normals.len() });
    }
    let began = Instant::now();
    let jobs: Vec<(usize, GraspSeed<T>, usize)> = tasks.iter().enumerate().map(|(i, t)| (i, t.seed, 0)).collect();
    let mut plans = run_fingers(&jobs, tasks, scene, hand, cfg);
    let mut rounds = 0;
    let mut conflicts = audit(&plans, scene, cfg);
    while conflicts.stage.is_some() && rounds < cfg.max_resample {
        rounds += 1;
        let jobs: Vec<(usize, GraspSeed<T>, usize)> = conflicts
            .retry
            .iter()
            .map(|&(f, other)| {
                let p = &plans[f];
                let k = p.resamples + 1;
                let dir = match other.and_then(|o| plans[o].contact.zip(p.contact).map(|(theirs, mine)| (o, mine - theirs))) {
                    Some((_, d)) if d.norm() > lit(1e-9) => d,
                    Some((o, _)) if (tasks[f].start - tasks[o].start).norm() > lit(1e-9) => tasks[f].start - tasks[o].start,
                    _ => golden_direction(&p.seed, k),
                };
                let seed = resample_seed(&p.seed, &dir, cfg.min_sep * lit(1.0 + 0.5 * k as f64), scene.bvh, scene.normals, cfg.rrt.fingertip_radius);
                (f, seed, k)
            })
            .collect();
        log::debug!("resample round {rounds}: fingers {:?}", jobs.iter().map(|j| j.0).collect::<Vec<_>>());
        for plan in run_fingers(&jobs, tasks, scene, hand, cfg) {
            let f = plan.finger_id;
            plans[f] = plan;
        }
        conflicts = audit(&plans, scene, cfg);
    }

    let solves: Vec<f64> = plans.iter().filter(|p| p.ik.is_some()).map(|p| p.ik_ms).collect();
    let ik_ms = if solves.is_empty() { 0.0 } else { solves.iter().sum::<f64>() / solves.len() as f64 };
    let aggregate_score = plans.iter().filter_map(|p| p.endpoint.map(|e| e.score)).fold(T::zero(), |a, b| a + b);
    let feasible = conflicts.stage.is_none();
    if !feasible {
        log::info!("hypothesis infeasible after {rounds} resample rounds: {}", conflicts.detail);
    }
    Ok(GraspHypothesis {
        fingers: plans,
        aggregate_score,
        feasible,
        failure: conflicts.stage,
        failure_detail: (!feasible).then_some(conflicts.detail),
        resample_rounds: rounds,
        relaxations: Vec::new(),
        planning_ms: began.elapsed().as_secs_f64() * 1e3,
        ik_ms,
        tasks: tasks.to_vec(),
        config: *cfg,
    })
}

/// Replans an infeasible hypothesis, applying the relaxations cumulatively in
/// order until one succeeds. The returned hypothesis lists every relaxation
/// applied.
pub fn replan_relaxed<T: Real>(previous: &GraspHypothesis<T>, scene: &PlanningScene<'_, T>, hand: &HandModel<T>) -> Result<GraspHypothesis<T>> {
    if previous.feasible {
        return Err(Error::Precondition("replanning requires an infeasible hypothesis".into()));
    }
    let mut cfg = previous.config;
    let mut applied = previous.relaxations.clone();
    let mut last = None;
    for relax in Relaxation::ORDER {
        if applied.contains(&relax) {
            continue;
        }
        relax.apply(&mut cfg);
        applied.push(relax);
        let mut h = plan_hand(&previous.tasks, scene, hand, &cfg)?;
        h.relaxations = applied.clone();
        log::info!("replanned with {:?}: feasible = {}", applied, h.feasible);
        if h.feasible {
            return Ok(h);
        }
        last = Some(h);
    }
    Ok(last.unwrap_or_else(|| previous.clone()))
}

/// Fingertip center distance statistics, for reporting.
pub fn min_pairwise_separation<T: Real>(h: &GraspHypothesis<T>) -> Option<f64> {
    let tips: Vec<Point3<T>> = h.fingers.iter().filter_map(|p| p.tip()).collect();
    let mut best: Option<f64> = None;
    for i in 0..tips.len() {
        for j in i + 1..tips.len() {
            let d = to_f64((tips[i] - tips[j]).norm());
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}
