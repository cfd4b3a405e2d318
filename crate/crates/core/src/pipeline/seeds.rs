//! Per-finger grasp seeds from a joint-space sweep of each finger's reach.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{aabb_overlap, Aabb, Point3, Vector3};
use crate::geometry::RigidTransform;
use crate::kinematics::{dls_ik, FingerChain, HandModel, JointConfig};
use crate::perception::{Bvh, NormalField};
use crate::planner::{Clearance, FingerTask, GraspSeed, HandPlanConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedSearchConfig {
    /// Samples per joint in the sweep.
    pub grid: usize,
    /// Largest allowed gap between a swept fingertip and the contact pose.
    pub reach_tolerance: f64,
    /// Preferred outward surface normal per finger.
    pub opposition: Vec<[f64; 3]>,
    /// Configuration each finger starts from.
    pub open_pose: Vec<Vec<f64>>,
}

impl Default for SeedSearchConfig {
    fn default() -> Self {
        Self {
            grid: 9,
            reach_tolerance: 0.01,
            opposition: vec![[0.0, -0.5, -0.866_025_403_784_438_6], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            open_pose: vec![vec![0.0, 0.0, -0.2, 0.0], vec![0.0, -0.2, 0.0], vec![0.0, -0.2, 0.0], vec![0.0, -0.2, 0.0], vec![0.0, -0.2, 0.0]],
        }
    }
}

impl SeedSearchConfig {
    pub fn validate(&self, hand: &HandModel<f64>) -> Result<()> {
        if self.grid < 2 {
            return Err(Error::Validation("seed grid needs at least 2 samples per joint".into()));
        }
        if !(self.reach_tolerance > 0.0) {
            return Err(Error::Validation("reach_tolerance must be positive".into()));
        }
        let n = hand.fingers().len();
        if self.opposition.len() != n || self.open_pose.len() != n {
            return Err(Error::Validation(format!("seed search needs one opposition direction and open pose per finger ({n})")));
        }
        for (f, (q, chain)) in self.open_pose.iter().zip(hand.fingers()).enumerate() {
            if q.len() != chain.dof() {
                return Err(Error::Validation(format!("open pose of finger {f} has {} values, chain has {} joints", q.len(), chain.dof())));
            }
            if !chain.within_limits(&JointConfig::from_column_slice(q)) {
                return Err(Error::Validation(format!("open pose of finger {f} violates joint limits")));
            }
        }
        Ok(())
    }
}

fn grid_configs(chain: &FingerChain<f64>, steps: usize) -> Vec<JointConfig<f64>> {
    let axes: Vec<Vec<f64>> = chain
        .joints()
        .iter()
        .map(|j| {
            let [lo, hi] = j.limits();
            (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
        })
        .collect();
    let total = steps.pow(axes.len() as u32);
    (0..total)
        .map(|mut k| {
            let mut q = JointConfig::zeros(axes.len());
            for (j, values) in axes.iter().enumerate().rev() {
                q[j] = values[k % steps];
                k /= steps;
            }
            q
        })
        .collect()
}

/// Mean of the cloud points within `radius` of point `index`.
pub fn patch_centroid(bvh: &Bvh<f64>, index: usize, radius: f64) -> Point3<f64> {
    let patch = bvh.radius_search(&bvh.points()[index], radius);
    let sum = patch.iter().fold(Vector3::zeros(), |acc, &i| acc + bvh.points()[i].coords);
    Point3::from(sum / patch.len() as f64)
}

/// True when the neighbors within `radius` of point `index` sit lopsidedly
/// to one side of it in the tangent plane, as they do along the rim of the
/// observed surface.
pub fn on_boundary(bvh: &Bvh<f64>, index: usize, normal: &Vector3<f64>, radius: f64) -> bool {
    let p = bvh.points()[index];
    let d = patch_centroid(bvh, index, radius) - p;
    (d - normal * normal.dot(&d)).norm() > 0.25 * radius
}

/// One task per finger. The thumb is placed first; every later finger keeps
/// `min_sep` and a non-overlapping fingertip box from those already placed.
///
/// A candidate contact is the patch centroid of the cloud point nearest a
/// swept fingertip, approached against its normal. It qualifies when it lies
/// away from the rim of the observed surface, the fingertip sits within
/// `reach_tolerance` of the resulting contact center and the straight
/// approach from the standoff point is clear. Candidates are
/// ranked by how well the normal matches the finger's opposition direction,
/// and the best one the IK solver actually reaches wins. A finger with no
/// candidate gets the closest miss so that planning reports why it fails.
pub fn propose_tasks(
    hand: &HandModel<f64>,
    bvh: &Bvh<f64>,
    normals: &NormalField<f64>,
    obstacles: &[Aabb<f64>],
    planner: &HandPlanConfig<f64>,
    cfg: &SeedSearchConfig,
) -> Result<Vec<FingerTask<f64>>> {
    cfg.validate(hand)?;
    if normals.normals.len() != bvh.len() {
        return Err(Error::Dimension { expected: bvh.len(), got: normals.normals.len() });
    }
    let rrt = &planner.rrt;
    let r = rrt.fingertip_radius;
    let tol = cfg.reach_tolerance;
    let check = Clearance::new(bvh, obstacles, r, rrt.collision_check_resolution);
    let mut placed: Vec<Point3<f64>> = Vec::new();
    let mut tasks = Vec::with_capacity(hand.fingers().len());

    for (f, chain) in hand.fingers().iter().enumerate() {
        let q_open = JointConfig::from_column_slice(&cfg.open_pose[f]);
        let start = chain.forward_kinematics(&q_open)?.position();
        let opp = Vector3::from(cfg.opposition[f]).try_normalize(1e-12).unwrap_or_else(Vector3::zeros);
        let mut candidates: Vec<(f64, usize, GraspSeed<f64>, JointConfig<f64>, Point3<f64>)> = Vec::new();
        let mut closest: Option<(f64, GraspSeed<f64>, JointConfig<f64>)> = None;

        for q in grid_configs(chain, cfg.grid) {
            let x = chain.forward_kinematics(&q)?.position();
            let hit = bvh.nearest(&x);
            let n = normals.normals[hit.index];
            let gap = (hit.distance - r).abs();
            if closest.as_ref().is_none_or(|c| gap < c.0) {
                let seed = GraspSeed::new(bvh.points()[hit.index], -n)?;
                closest = Some((gap, seed, q.clone()));
            }
            if gap > 2.0 * tol {
                continue;
            }
            let t = patch_centroid(bvh, hit.index, r);
            if on_boundary(bvh, hit.index, &n, 2.0 * r) {
                continue;
            }
            let c = t + n * r;
            let err = (x - c).norm();
            if err > tol {
                continue;
            }
            let tip_box = Aabb::from_point(c).inflate(r)?;
            let crowded = placed
                .iter()
                .any(|o| (o - c).norm() < planner.min_sep || aabb_overlap(&tip_box, &Aabb::from_point(*o).inflate(r).expect("radius validated")));
            if crowded {
                continue;
            }
            candidates.push((n.dot(&opp) - 0.1 * err / tol, hit.index, GraspSeed::new(t, -n)?, q, c));
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        candidates.dedup_by(|a, b| a.1 == b.1);

        let mut chosen = None;
        for (_, _, seed, q, c) in candidates {
            let standoff = seed.standoff(rrt.clearance);
            let near_contact = |i: usize| (bvh.points()[i] - seed.t).norm() > 2.0 * r;
            if !check.point_free(&standoff) || !check.segment_free_except(&standoff, &c, &near_contact) {
                continue;
            }
            let sol = dls_ik(chain, &RigidTransform::from_translation(c.coords), &planner.ik, &q)?;
            if sol.converged {
                chosen = Some((seed, sol.q, c));
                break;
            }
        }

        let (seed, q_warm) = match chosen {
            Some((seed, q, c)) => {
                placed.push(c);
                (seed, q)
            }
            None => {
                log::debug!("finger {f}: no reachable contact, using closest miss");
                let (_, seed, q) = closest.ok_or(Error::EmptyInput)?;
                (seed, q)
            }
        };
        tasks.push(FingerTask { seed, start, q_warm });
    }
    Ok(tasks)
}
