mod common;

use graspkit::geometry::{Aabb, Point3, PointCloud, Vector3};
use graspkit::geometry::RigidTransform;
use graspkit::kinematics::{FingerChain, HandModel, Joint};
use graspkit::perception::{estimate_normals_with, Bvh, NormalField, DEFAULT_LEAF_CAPACITY};
use graspkit::pipeline::{propose_tasks, synthesize_scene, SceneConfig, SeedSearchConfig};
use graspkit::planner::{
    min_pairwise_separation, plan_hand, replan_relaxed, rrt_star, select_endpoint, FailureStage, FingerFailure, FingerTask, FingerTrajectory,
    GraspSeed, HandPlanConfig, PlanningScene, Relaxation, RrtConfig,
};
use graspkit::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{audit_trajectory, select_oracle};

/// Flat square patch of points in the plane `x = x0`, spacing `h`.
fn wall_patch(x0: f64, half: f64, h: f64) -> Vec<Point3<f64>> {
    let n = (2.0 * half / h).round() as i32;
    let mut pts = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            pts.push(Point3::new(x0, -half + i as f64 * h, -half + j as f64 * h));
        }
    }
    pts
}

fn bvh(points: Vec<Point3<f64>>) -> Bvh<f64> {
    Bvh::from_points(points, DEFAULT_LEAF_CAPACITY).unwrap()
}

#[test]
fn open_space_path_is_nearly_straight() {
    let cloud = bvh(wall_patch(0.2, 0.02, 0.002));
    let seed = GraspSeed::new(Point3::new(0.2, 0.0, 0.0), Vector3::x()).unwrap();
    let start = Point3::new(0.0, 0.03, -0.02);
    let cfg = RrtConfig::default();
    let out = rrt_star(&start, &seed, &cloud, &[], &cfg, 0).unwrap();
    let best = &out.trajectories[0];
    let contact = seed.contact_center(cfg.fingertip_radius);
    let standoff = seed.standoff(cfg.clearance);
    let lower = (standoff - start).norm() + (contact - standoff).norm();
    assert!(best.cost <= 1.05 * lower, "{} vs {lower}", best.cost);
    assert!((best.cost - best.recompute_cost()).abs() < 1e-12);
    assert!((best.waypoints.last().unwrap() - contact).norm() < 1e-12);
    assert!(audit_trajectory(best, cloud.points(), &[], cfg.fingertip_radius, &seed.t).is_empty());
}

#[test]
fn start_inside_inflated_object_is_rejected() {
    let cloud = bvh(wall_patch(0.2, 0.02, 0.002));
    let seed = GraspSeed::new(Point3::new(0.2, 0.0, 0.0), Vector3::x()).unwrap();
    let start = Point3::new(0.195, 0.001, 0.0);
    assert!(matches!(rrt_star(&start, &seed, &cloud, &[], &RrtConfig::default(), 0), Err(Error::Precondition(_))));
    let boxed = [Aabb::new(Point3::new(-0.01, -0.01, -0.01), Point3::new(0.01, 0.01, 0.01)).unwrap()];
    assert!(matches!(rrt_star(&Point3::origin(), &seed, &cloud, &boxed, &RrtConfig::default(), 0), Err(Error::Precondition(_))));
}

/// Wall at `x in [0.09, 0.11]` with one opening at `y in [0.04, 0.08]`, `z in [-0.02, 0.02]`.
fn wall_with_gap() -> Vec<Aabb<f64>> {
    let b = |lo: [f64; 3], hi: [f64; 3]| Aabb::new(Point3::from(lo), Point3::from(hi)).unwrap();
    vec![
        b([0.09, -0.3, -0.3], [0.11, 0.04, 0.3]),
        b([0.09, 0.08, -0.3], [0.11, 0.3, 0.3]),
        b([0.09, 0.04, -0.3], [0.11, 0.08, -0.02]),
        b([0.09, 0.04, 0.02], [0.11, 0.08, 0.3]),
    ]
}

#[test]
fn paths_thread_the_wall_gap() {
    let cloud = bvh(wall_patch(0.2, 0.02, 0.002));
    let seed = GraspSeed::new(Point3::new(0.2, 0.0, 0.0), Vector3::x()).unwrap();
    let walls = wall_with_gap();
    let cfg = RrtConfig { max_samples: 6000, time_budget_ms: 20_000, workspace_margin: 0.1, ..RrtConfig::default() };
    let out = rrt_star(&Point3::origin(), &seed, &cloud, &walls, &cfg, 0).unwrap();
    assert!(!out.trajectories.is_empty());
    for t in &out.trajectories {
        let through = t.waypoints.iter().any(|p| (0.09..=0.11).contains(&p.x) && (0.04..=0.08).contains(&p.y) && (-0.02..=0.02).contains(&p.z));
        assert!(through, "trajectory avoids the gap slab");
        let v = audit_trajectory(t, cloud.points(), &walls, cfg.fingertip_radius, &seed.t);
        assert!(v.is_empty(), "{v:?}");
    }
    assert_eq!(out.stats.rewire_cost_increases, 0);
    assert!(out.stats.rewires > 0);
}

#[test]
fn rewiring_never_raises_costs_across_seeds() {
    let mut pts = wall_patch(0.2, 0.03, 0.003);
    pts.extend(wall_patch(0.1, 0.01, 0.002).into_iter().map(|p| p + Vector3::new(0.0, 0.0, 0.0)));
    let cloud = bvh(pts);
    let seed = GraspSeed::new(Point3::new(0.2, 0.0, 0.0), Vector3::x()).unwrap();
    for s in 0..10 {
        let cfg = RrtConfig { rng_seed: s, max_samples: 1500, time_budget_ms: 10_000, ..RrtConfig::default() };
        let out = rrt_star(&Point3::origin(), &seed, &cloud, &[], &cfg, 1).unwrap();
        assert_eq!(out.stats.rewire_cost_increases, 0);
        for t in &out.trajectories {
            assert!(audit_trajectory(t, cloud.points(), &[], cfg.fingertip_radius, &seed.t).is_empty());
        }
        let costs: Vec<f64> = out.trajectories.iter().map(|t| t.cost).collect();
        assert!(costs.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn fixed_seed_is_bit_identical() {
    let cloud = bvh(wall_patch(0.2, 0.02, 0.002));
    let seed = GraspSeed::new(Point3::new(0.2, 0.0, 0.0), Vector3::x()).unwrap();
    let walls = wall_with_gap();
    let cfg = RrtConfig { rng_seed: 42, max_samples: 800, time_budget_ms: 20_000, workspace_margin: 0.1, ..RrtConfig::default() };
    let a = rrt_star(&Point3::origin(), &seed, &cloud, &walls, &cfg, 2);
    let b = rrt_star(&Point3::origin(), &seed, &cloud, &walls, &cfg, 2);
    match (a, b) {
        (Ok(a), Ok(b)) => {
            assert_eq!(a.trajectories, b.trajectories);
            assert_eq!(a.stats.samples, b.stats.samples);
        }
        (Err(Error::NoTrajectoryFound), Err(Error::NoTrajectoryFound)) => {}
        other => panic!("runs disagree: {other:?}"),
    }
}

#[test]
fn select_endpoint_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let cloud: Vec<Point3<f64>> = (0..rng.random_range(1..300))
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        // Coarse grid coordinates make exact distance ties likely.
        let grid = |rng: &mut ChaCha8Rng| (rng.random_range(-4..=4) as f64) * 0.25;
        let trajs: Vec<FingerTrajectory<f64>> = (0..rng.random_range(1..6))
            .map(|_| {
                let w: Vec<Point3<f64>> = (0..rng.random_range(1..12)).map(|_| Point3::new(grid(&mut rng), grid(&mut rng), grid(&mut rng))).collect();
                let cost = if rng.random_bool(0.5) { 1.0 } else { graspkit::planner::path_length(&w) };
                FingerTrajectory { finger_id: 0, approach_start: w.len() - 1, waypoints: w, cost }
            })
            .collect();
        let index = bvh(cloud.clone());
        let got = select_endpoint(&trajs, &index).unwrap();
        let (ti, wi, d) = select_oracle(&trajs, &cloud).unwrap();
        assert_eq!((got.trajectory, got.waypoint), (ti, wi));
        assert!((got.distance - d).abs() < 1e-12);
    }
}

struct Fixture {
    hand: HandModel<f64>,
    bvh: Bvh<f64>,
    normals: NormalField<f64>,
    tasks: Vec<FingerTask<f64>>,
    cfg: HandPlanConfig<f64>,
}

/// Noise-free visible cylinder surface in front of the synthetic hand, with
/// the pipeline's seed search supplying the tasks.
fn cylinder_fixture(extra: &[Point3<f64>]) -> Fixture {
    let scene = synthesize_scene(&SceneConfig { noise_sigma: 0.0, outlier_fraction: 0.0, plane: false, ..SceneConfig::default() }).unwrap();
    let hand = HandModel::synthetic();
    let cfg = HandPlanConfig { parallel: false, ..HandPlanConfig::default() };
    let mut cloud = PointCloud::new(scene.cloud.points.clone());
    let base = graspkit::Bvh::build(&cloud, DEFAULT_LEAF_CAPACITY).unwrap();
    let normals = estimate_normals_with(&base, 12, &scene.camera).unwrap();
    let tasks = propose_tasks(&hand, &base, &normals, &[], &cfg, &SeedSearchConfig::default()).unwrap();
    if extra.is_empty() {
        return Fixture { hand, bvh: base, normals, tasks, cfg };
    }
    cloud.points.extend_from_slice(extra);
    let bvh = graspkit::Bvh::build(&cloud, DEFAULT_LEAF_CAPACITY).unwrap();
    let normals = estimate_normals_with(&bvh, 12, &scene.camera).unwrap();
    Fixture { hand, bvh, normals, tasks, cfg }
}

impl Fixture {
    fn scene<'a>(&'a self, obstacles: &'a [Aabb<f64>]) -> PlanningScene<'a, f64> {
        PlanningScene { bvh: &self.bvh, normals: &self.normals, obstacles }
    }
}

#[test]
fn cylinder_grasp_is_feasible_and_sound() {
    let fx = cylinder_fixture(&[]);
    let h = plan_hand(&fx.tasks, &fx.scene(&[]), &fx.hand, &fx.cfg).unwrap();
    assert!(h.feasible, "{:?}", h.failure_detail);
    assert!(min_pairwise_separation(&h).unwrap() >= fx.cfg.min_sep);
    for p in &h.fingers {
        for t in &p.trajectories {
            let v = audit_trajectory(t, fx.bvh.points(), &[], fx.cfg.rrt.fingertip_radius, &p.seed.t);
            assert!(v.is_empty(), "finger {}: {v:?}", p.finger_id);
        }
        assert!(p.converged);
    }
    assert!(matches!(replan_relaxed(&h, &fx.scene(&[]), &fx.hand), Err(Error::Precondition(_))));
    let again = plan_hand(&fx.tasks, &fx.scene(&[]), &fx.hand, &fx.cfg).unwrap();
    assert_eq!(again.fingers.iter().map(|p| &p.trajectories).collect::<Vec<_>>(), h.fingers.iter().map(|p| &p.trajectories).collect::<Vec<_>>());
    assert_eq!(again.aggregate_score, h.aggregate_score);
}

#[test]
fn coincident_seeds_are_separated() {
    // Ring finger replaced by a copy of the middle finger mounted 2 mm to its
    // side, so both reach a shared seed in front of them.
    let mut fx = cylinder_fixture(&[]);
    let middle = &fx.hand.fingers()[2];
    let mut joints = middle.joints().to_vec();
    let j0 = joints[0].clone();
    let base = *j0.parent_offset();
    let shifted = RigidTransform::new(*base.rotation(), base.translation() - Vector3::new(0.002, 0.0, 0.0)).unwrap();
    joints[0] = Joint::new(shifted, (*j0.axis()).into_inner(), j0.limits(), j0.velocity_limit()).unwrap();
    let mut chains = fx.hand.fingers().to_vec();
    chains[3] = FingerChain::new("ring", joints, *middle.tip_offset()).unwrap();
    fx.hand = HandModel::new("twin", chains).unwrap();

    let mut tasks = fx.tasks.clone();
    let t = tasks[2].seed.t;
    let hit = fx.bvh.nearest(&Point3::new(base.translation().x - 0.001, t.y, t.z));
    tasks[2].seed = GraspSeed::new(fx.bvh.points()[hit.index], -fx.normals.normals[hit.index]).unwrap();
    tasks[3] = FingerTask { start: tasks[2].start - Vector3::new(0.002, 0.0, 0.0), ..tasks[2].clone() };

    let first = plan_hand(&tasks, &fx.scene(&[]), &fx.hand, &HandPlanConfig { max_resample: 0, ..fx.cfg }).unwrap();
    assert_eq!(first.failure, Some(FailureStage::Separation));
    let h = plan_hand(&tasks, &fx.scene(&[]), &fx.hand, &HandPlanConfig { max_resample: 1, ..fx.cfg }).unwrap();
    assert_eq!(h.resample_rounds, 1);
    let moved: Vec<usize> = h.fingers.iter().filter(|p| p.resamples > 0).map(|p| p.finger_id).collect();
    assert_eq!(moved.len(), 1);
    assert!([2, 3].contains(&moved[0]));
    assert!(min_pairwise_separation(&h).unwrap() >= fx.cfg.min_sep);
}

#[test]
fn enclosed_object_has_no_trajectories() {
    let fx = cylinder_fixture(&[]);
    let b = fx.bvh.bounds().inflate(0.02).unwrap();
    let t = 0.005;
    let shell: Vec<Aabb<f64>> = (0..3)
        .flat_map(|axis| {
            [false, true].map(|upper| {
                let (mut lo, mut hi) = (b.min, b.max);
                if upper {
                    lo[axis] = b.max[axis];
                    hi[axis] = b.max[axis] + t;
                } else {
                    hi[axis] = b.min[axis];
                    lo[axis] = b.min[axis] - t;
                }
                Aabb::new(lo, hi).unwrap()
            })
        })
        .collect();
    let cfg = HandPlanConfig { max_resample: 1, ..fx.cfg };
    let h = plan_hand(&fx.tasks, &fx.scene(&shell), &fx.hand, &cfg).unwrap();
    assert!(!h.feasible);
    assert_eq!(h.failure, Some(FailureStage::Trajectory));
    for p in &h.fingers {
        assert_eq!(p.failure, Some(FingerFailure::NoTrajectoryFound), "finger {}", p.finger_id);
    }
    let r = replan_relaxed(&h, &fx.scene(&shell), &fx.hand).unwrap();
    assert!(!r.feasible);
    assert_eq!(r.relaxations, Relaxation::ORDER.to_vec());
}

#[test]
fn tight_goal_tolerance_is_relaxed() {
    let probe = cylinder_fixture(&[]);
    let cfg = probe.cfg;
    // A stray point 3 mm past the index standoff blocks the whole default
    // goal ball but not the doubled one.
    let seed = probe.tasks[1].seed;
    let blocker = seed.standoff(cfg.rrt.clearance) + seed.approach.into_inner() * 0.003;
    let fx = cylinder_fixture(&[blocker]);
    let cfg = HandPlanConfig { max_resample: 0, ..cfg };
    let h = plan_hand(&fx.tasks, &fx.scene(&[]), &fx.hand, &cfg).unwrap();
    assert!(!h.feasible);
    assert_eq!(h.fingers[1].failure, Some(FingerFailure::NoTrajectoryFound));
    assert!(h.fingers.iter().filter(|p| p.finger_id != 1).all(|p| p.failure.is_none()));
    let r = replan_relaxed(&h, &fx.scene(&[]), &fx.hand).unwrap();
    assert!(r.feasible, "{:?}", r.failure_detail);
    assert_eq!(r.relaxations, vec![Relaxation::GoalTolerance]);
    assert_eq!(r.config.rrt.goal_tolerance, 2.0 * cfg.rrt.goal_tolerance);
}
