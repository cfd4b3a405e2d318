//! RRT* over fingertip positions with clearance against the object cloud.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_aabb, Aabb, Point3, Ray, Unit, Vector3};
use crate::perception::Bvh;
use crate::scalar::{lit, to_f64, Real};

/// Target contact point on the surface and the direction the fingertip moves
/// along to reach it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspSeed<T: Real> {
    pub t: Point3<T>,
    pub approach: Unit<Vector3<T>>,
}

impl<T: Real> GraspSeed<T> {
    pub fn new(t: Point3<T>, approach: Vector3<T>) -> Result<Self> {
        if !(approach.norm() > T::zero()) {
            return Err(Error::InvalidArgument("approach direction must be nonzero".into()));
        }
        Ok(Self { t, approach: Unit::new_normalize(approach) })
    }

    /// Pre-contact standoff `t - clearance * a`.
    pub fn standoff(&self, clearance: T) -> Point3<T> {
        self.t - self.approach.as_ref() * clearance
    }

    /// Fingertip center when the pad touches `t`.
    pub fn contact_center(&self, radius: T) -> Point3<T> {
        self.t - self.approach.as_ref() * radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtConfig<T: Real> {
    pub step: T,
    pub goal_bias: T,
    pub rewire_radius: T,
    pub max_samples: usize,
    pub time_budget_ms: u64,
    pub goal_tolerance: T,
    pub collision_check_resolution: T,
    pub fingertip_radius: T,
    pub clearance: T,
    pub rng_seed: u64,
    /// Sampling box = bounds of start and standoff grown by this margin.
    pub workspace_margin: T,
    pub max_trajectories: usize,
}

impl<T: Real> Default for RrtConfig<T> {
    fn default() -> Self {
        Self {
            step: lit(0.01),
            goal_bias: lit(0.1),
            rewire_radius: lit(0.025),
            max_samples: 400,
            time_budget_ms: 250,
            goal_tolerance: lit(0.004),
            collision_check_resolution: lit(0.002),
            fingertip_radius: lit(0.008),
            clearance: lit(0.01),
            rng_seed: 0,
            workspace_margin: lit(0.04),
            max_trajectories: 8,
        }
    }
}

impl<T: Real> RrtConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("rewire_radius", self.rewire_radius),
            ("goal_tolerance", self.goal_tolerance),
            ("collision_check_resolution", self.collision_check_resolution),
            ("fingertip_radius", self.fingertip_radius),
            ("clearance", self.clearance),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.goal_bias >= T::zero() && self.goal_bias <= T::one()) {
            return Err(Error::InvalidArgument("goal_bias must lie in [0, 1]".into()));
        }
        if self.max_samples == 0 || self.time_budget_ms == 0 || self.max_trajectories == 0 {
            return Err(Error::InvalidArgument("max_samples, time_budget_ms and max_trajectories must be positive".into()));
        }
        if !(self.workspace_margin >= T::zero()) {
            return Err(Error::InvalidArgument("workspace_margin must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerTrajectory<T: Real> {
    pub finger_id: usize,
    pub waypoints: Vec<Point3<T>>,
    /// Path length.
    pub cost: T,
    /// Index of the standoff waypoint; later waypoints form the straight
    /// contact approach.
    pub approach_start: usize,
}

impl<T: Real> FingerTrajectory<T> {
    pub fn recompute_cost(&self) -> T {
        path_length(&self.waypoints)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RrtStats {
    pub samples: usize,
    pub nodes: usize,
    pub rewires: usize,
    /// Rewires that would have raised some node's cost-to-come. Always zero.
    pub rewire_cost_increases: usize,
    pub goal_nodes: usize,
    pub elapsed_ms: f64,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone)]
pub struct RrtOutcome<T: Real> {
    /// Sorted by cost, ascending.
    pub trajectories: Vec<FingerTrajectory<T>>,
    pub stats: RrtStats,
}

/// Free-space test shared by the planner and the hand-level passes.
pub struct Clearance<'a, T: Real> {
    bvh: &'a Bvh<T>,
    obstacles: &'a [Aabb<T>],
    radius: T,
    resolution: T,
}

impl<'a, T: Real> Clearance<'a, T> {
    pub fn new(bvh: &'a Bvh<T>, obstacles: &'a [Aabb<T>], radius: T, resolution: T) -> Self {
        Self { bvh, obstacles, radius, resolution }
    }

    fn margin(&self) -> T {
        self.radius + self.resolution / (T::one() + T::one())
    }

    /// Point clear of the inflated cloud with half a check step to spare.
    pub fn point_free(&self, p: &Point3<T>) -> bool {
        self.point_free_except(p, &|_| true)
    }

    fn point_free_except(&self, p: &Point3<T>, keep: &dyn Fn(usize) -> bool) -> bool {
        if self.obstacles.iter().any(|b| b.contains_point(p)) {
            return false;
        }
        match self.bvh.nearest_filtered(p, keep) {
            Some(hit) => hit.distance > self.margin(),
            None => true,
        }
    }

    /// Samples the segment every `resolution` and tests it exactly against
    /// the obstacle boxes.
    pub fn segment_free(&self, a: &Point3<T>, b: &Point3<T>) -> bool {
        self.segment_free_except(a, b, &|_| true)
    }

    pub fn segment_free_except(&self, a: &Point3<T>, b: &Point3<T>, keep: &dyn Fn(usize) -> bool) -> bool {
        if self.obstacles.iter().any(|o| segment_hits_box(a, b, o)) {
            return false;
        }
        let len = (b - a).norm();
        let n = to_f64(len / self.resolution).ceil().max(1.0) as usize;
        (0..=n).all(|i| {
            let s = lit::<T>(i as f64 / n as f64);
            self.point_free_except(&(a + (b - a) * s), keep)
        })
    }
}

/// Exact segment versus closed box test.
pub fn segment_hits_box<T: Real>(a: &Point3<T>, b: &Point3<T>, bounds: &Aabb<T>) -> bool {
    if bounds.contains_point(a) || bounds.contains_point(b) {
        return true;
    }
    let Ok(ray) = Ray::new(*a, b - a) else {
        return false;
    };
    matches!(ray_aabb(&ray, bounds), Some(h) if h.t_enter <= T::one())
}

pub fn path_length<T: Real>(points: &[Point3<T>]) -> T {
    points.windows(2).fold(T::zero(), |acc, w| acc + (w[1] - w[0]).norm())
}

/// Inserts points so that no gap exceeds `max_gap`.
pub fn densify<T: Real>(points: &[Point3<T>], max_gap: T) -> Vec<Point3<T>> {
    let mut out = Vec::with_capacity(points.len());
    for w in points.windows(2) {
        out.push(w[0]);
        let n = to_f64((w[1] - w[0]).norm() / max_gap).ceil() as usize;
        for i in 1..n {
            out.push(w[0] + (w[1] - w[0]) * lit::<T>(i as f64 / n as f64));
        }
    }
    out.extend(points.last().copied());
    out
}

struct Node<T: Real> {
    p: Point3<T>,
    parent: Option<usize>,
    cost: T,
    children: Vec<usize>,
}

struct Tree<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Tree<T> {
    fn add(&mut self, p: Point3<T>, parent: usize) -> usize {
        let cost = self.nodes[parent].cost + (p - self.nodes[parent].p).norm();
        let id = self.nodes.len();
        self.nodes.push(Node { p, parent: Some(parent), cost, children: Vec::new() });
        self.nodes[parent].children.push(id);
        id
    }

    fn nearest(&self, p: &Point3<T>) -> usize {
        let mut best = 0;
        let mut bd = (self.nodes[0].p - p).norm_squared();
        for (i, n) in self.nodes.iter().enumerate().skip(1) {
            let d = (n.p - p).norm_squared();
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }

    fn near(&self, p: &Point3<T>, radius: T) -> Vec<usize> {
        let r2 = radius * radius;
        (0..self.nodes.len()).filter(|&i| (self.nodes[i].p - p).norm_squared() <= r2).collect()
    }

    fn reparent(&mut self, id: usize, parent: usize) {
        if let Some(old) = self.nodes[id].parent {
            self.nodes[old].children.retain(|&c| c != id);
        }
        self.nodes[id].parent = Some(parent);
        self.nodes[parent].children.push(id);
        let new_cost = self.nodes[parent].cost + (self.nodes[id].p - self.nodes[parent].p).norm();
        let delta = new_cost - self.nodes[id].cost;
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            self.nodes[n].cost += delta;
            stack.extend(self.nodes[n].children.iter().copied());
        }
    }

    fn path_to(&self, mut id: usize) -> Vec<Point3<T>> {
        let mut out = vec![self.nodes[id].p];
        while let Some(p) = self.nodes[id].parent {
            out.push(self.nodes[p].p);
            id = p;
        }
        out.reverse();
        out
    }
}

fn perpendicular<T: Real>(v: &Vector3<T>) -> Vector3<T> {
    let trial = if v.x.abs() <= v.y.abs() && v.x.abs() <= v.z.abs() { Vector3::x() } else if v.y.abs() <= v.z.abs() { Vector3::y() } else { Vector3::z() };
    v.cross(&trial).normalize()
}

/// Grows an RRT* tree from `start` toward the seed's standoff point and
/// returns paths that end within `goal_tolerance` of it, each extended by a
/// straight move along the approach axis to contact depth. A goal node with a
/// free link to the standoff point is snapped onto it first.
///
/// The tree keeps every sampled segment more than `fingertip_radius` from the
/// cloud; the approach only ignores cloud points within two fingertip radii
/// of the contact point.
pub fn rrt_star<T: Real>(
    start: &Point3<T>,
    seed: &GraspSeed<T>,
    bvh: &Bvh<T>,
    obstacles: &[Aabb<T>],
    cfg: &RrtConfig<T>,
    finger_id: usize,
) -> Result<RrtOutcome<T>> {
    cfg.validate()?;
    let began = Instant::now();
    let budget = Duration::from_millis(cfg.time_budget_ms);
    let check = Clearance::new(bvh, obstacles, cfg.fingertip_radius, cfg.collision_check_resolution);
    if !check.point_free(start) {
        return Err(Error::Precondition(format!("finger {finger_id}: start lies inside the inflated object or an obstacle")));
    }
    let goal = seed.standoff(cfg.clearance);
    let contact = seed.contact_center(cfg.fingertip_radius);
    let mut stats = RrtStats::default();

    let patch_r = cfg.fingertip_radius * lit(2.0);
    let mut in_patch = vec![false; bvh.len()];
    for i in bvh.radius_search(&seed.t, patch_r) {
        in_patch[i] = true;
    }
    let outside_patch = |i: usize| !in_patch[i];
    let a = seed.approach.into_inner();
    // Straight move along the approach axis down to the contact depth.
    let approach_from = |x: &Point3<T>| -> Option<Vec<Point3<T>>> {
        let end = x + a * (contact - x).dot(&a);
        let pts = densify(&[*x, end], cfg.step);
        pts.windows(2).all(|w| check.segment_free_except(&w[0], &w[1], &outside_patch)).then_some(pts)
    };

    let mut tree = Tree { nodes: vec![Node { p: *start, parent: None, cost: T::zero(), children: Vec::new() }] };
    let mut goal_nodes = Vec::new();
    let at_goal = |p: &Point3<T>| (p - goal).norm() <= cfg.goal_tolerance;

    // Straight and arc primitives as initial branches.
    let chord = goal - start;
    let bulge: Vector3<T> = {
        let away: Vector3<T> = -seed.approach.into_inner();
        let side = away - chord * (away.dot(&chord) / chord.norm_squared().max(T::default_epsilon()));
        if side.norm() > lit::<T>(1e-9) { side.normalize() } else { perpendicular(&chord) }
    };
    let mid = start + chord * lit::<T>(0.5);
    let control = mid + bulge * (chord.norm() * lit::<T>(0.5));
    let curves: [Vec<Point3<T>>; 2] = [
        densify(&[*start, goal], cfg.step),
        {
            let n = to_f64(chord.norm() * lit(1.6) / cfg.step).ceil().max(2.0) as usize;
            (0..=n)
                .map(|i| {
                    let s = lit::<T>(i as f64 / n as f64);
                    let u = T::one() - s;
                    Point3::from(start.coords * (u * u) + control.coords * (u * s * lit(2.0)) + goal.coords * (s * s))
                })
                .collect()
        },
    ];
    for curve in &curves {
        if curve.windows(2).all(|w| check.segment_free(&w[0], &w[1])) {
            let mut parent = 0;
            for p in &curve[1..] {
                parent = tree.add(*p, parent);
            }
            goal_nodes.push(parent);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(finger_id as u64));
    let mut space = Aabb::from_points(&[*start, goal])?.inflate(cfg.workspace_margin)?;
    space = space.union(&Aabb::from_point(control));
    let sample_axis = |rng: &mut ChaCha8Rng, lo: T, hi: T| if lo < hi { lit::<T>(rng.random_range(to_f64(lo)..=to_f64(hi))) } else { lo };

    while stats.samples < cfg.max_samples {
        if began.elapsed() >= budget {
            stats.budget_exhausted = true;
            break;
        }
        stats.samples += 1;
        let target = if lit::<T>(rng.random::<f64>()) < cfg.goal_bias {
            let tol = to_f64(cfg.goal_tolerance);
            loop {
                let v = Vector3::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
                if v.norm_squared() <= 1.0 {
                    break goal + v.map(|c| lit::<T>(c * tol));
                }
            }
        } else {
            Point3::new(
                sample_axis(&mut rng, space.min.x, space.max.x),
                sample_axis(&mut rng, space.min.y, space.max.y),
                sample_axis(&mut rng, space.min.z, space.max.z),
            )
        };
        let from = tree.nearest(&target);
        let dir = target - tree.nodes[from].p;
        let dist = dir.norm();
        if dist <= T::default_epsilon() {
            continue;
        }
        let x_new = if dist > cfg.step { tree.nodes[from].p + dir * (cfg.step / dist) } else { target };
        if !check.point_free(&x_new) {
            continue;
        }

        let near = tree.near(&x_new, cfg.rewire_radius);
        let mut best: Option<(usize, T)> = None;
        let mut order: Vec<(T, usize)> = near.iter().map(|&i| (tree.nodes[i].cost + (x_new - tree.nodes[i].p).norm(), i)).collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        for &(c, i) in &order {
            if check.segment_free(&tree.nodes[i].p, &x_new) {
                best = Some((i, c));
                break;
            }
        }
        if best.is_none() && !near.contains(&from) && check.segment_free(&tree.nodes[from].p, &x_new) {
            best = Some((from, tree.nodes[from].cost + (x_new - tree.nodes[from].p).norm()));
        }
        let Some((parent, _)) = best else {
            continue;
        };
        let id = tree.add(x_new, parent);

        for &(_, i) in &order {
            if i == parent || tree.nodes[i].parent.is_none() {
                continue;
            }
            let via = tree.nodes[id].cost + (tree.nodes[i].p - x_new).norm();
            if via < tree.nodes[i].cost && !is_ancestor(&tree, i, id) && check.segment_free(&x_new, &tree.nodes[i].p) {
                let before = tree.nodes[i].cost;
                tree.reparent(i, id);
                stats.rewires += 1;
                if tree.nodes[i].cost > before {
                    stats.rewire_cost_increases += 1;
                }
            }
        }
        if at_goal(&x_new) {
            goal_nodes.push(id);
        }
    }
    stats.nodes = tree.nodes.len();
    goal_nodes.sort_unstable();
    goal_nodes.dedup();
    stats.goal_nodes = goal_nodes.len();

    goal_nodes.sort_by(|&x, &y| tree.nodes[x].cost.partial_cmp(&tree.nodes[y].cost).unwrap_or(std::cmp::Ordering::Equal).then(x.cmp(&y)));
    let mut trajectories = Vec::new();
    for &g in &goal_nodes {
        if trajectories.len() >= cfg.max_trajectories {
            break;
        }
        let mut tree_part = tree.path_to(g);
        let last = *tree_part.last().expect("path holds the goal node");
        if last != goal && check.segment_free(&last, &goal) {
            tree_part.push(goal);
        }
        let Some(approach) = approach_from(tree_part.last().expect("path holds the goal node")) else {
            continue;
        };
        let mut waypoints = densify(&tree_part, cfg.step);
        let approach_start = waypoints.len() - 1;
        waypoints.extend_from_slice(&approach[1..]);
        let cost = path_length(&waypoints);
        trajectories.push(FingerTrajectory { finger_id, waypoints, cost, approach_start });
    }
    trajectories.sort_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap_or(std::cmp::Ordering::Equal));
    trajectories.dedup_by(|a, b| a.waypoints == b.waypoints);
    trajectories.truncate(cfg.max_trajectories);
    stats.elapsed_ms = began.elapsed().as_secs_f64() * 1e3;
    if trajectories.is_empty() {
        log::debug!("finger {finger_id}: no path after {} samples", stats.samples);
        return Err(Error::NoTrajectoryFound);
    }
    Ok(RrtOutcome { trajectories, stats })
}

fn is_ancestor<T: Real>(tree: &Tree<T>, candidate: usize, mut node: usize) -> bool {
    while let Some(p) = tree.nodes[node].parent {
        if p == candidate {
            return true;
        }
        node = p;
    }
    false
}
