//! Brute-force oracles shared by the integration tests. None of these reuse
//! the library's traversal or slab code.
#![allow(dead_code)]

use graspkit::geometry::{Aabb, Point3};
use graspkit::planner::FingerTrajectory;

pub fn segment_point_distance(a: &Point3<f64>, b: &Point3<f64>, p: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 == 0.0 { 0.0 } else { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) };
    (a + ab * s - p).norm()
}

/// Liang-Barsky clip of the closed segment against the closed box.
pub fn segment_enters_box(a: &Point3<f64>, b: &Point3<f64>, bx: &Aabb<f64>) -> bool {
    let d = b - a;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for k in 0..3 {
        for (p, q) in [(-d[k], a[k] - bx.min[k]), (d[k], bx.max[k] - a[k])] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    lo = lo.max(r);
                } else {
                    hi = hi.min(r);
                }
            }
        }
    }
    lo <= hi
}

/// Violations of the trajectory clearance contract, checked exhaustively
/// against every cloud point. Tree segments must stay more than `radius`
/// from the cloud; approach segments ignore points within `2 radius` of the
/// seed point.
pub fn audit_trajectory(traj: &FingerTrajectory<f64>, cloud: &[Point3<f64>], obstacles: &[Aabb<f64>], radius: f64, seed_t: &Point3<f64>) -> Vec<String> {
    let mut out = Vec::new();
    for (i, w) in traj.waypoints.windows(2).enumerate() {
        let approach = i >= traj.approach_start;
        for (k, p) in cloud.iter().enumerate() {
            if approach && (p - seed_t).norm() <= 2.0 * radius {
                continue;
            }
            let d = segment_point_distance(&w[0], &w[1], p);
            if d <= radius {
                out.push(format!("segment {i} within {d:.5} of point {k}"));
            }
        }
        for (k, b) in obstacles.iter().enumerate() {
            if segment_enters_box(&w[0], &w[1], b) {
                out.push(format!("segment {i} enters obstacle {k}"));
            }
        }
    }
    out
}

/// Exhaustive waypoint scan with the documented tie order
/// (distance, trajectory cost, waypoint index, trajectory index).
pub fn select_oracle(trajs: &[FingerTrajectory<f64>], cloud: &[Point3<f64>]) -> Option<(usize, usize, f64)> {
    let mut all = Vec::new();
    for (ti, t) in trajs.iter().enumerate() {
        for (wi, w) in t.waypoints.iter().enumerate() {
            let d = cloud.iter().map(|p| (p - w).norm()).fold(f64::INFINITY, f64::min);
            all.push((d, t.cost, wi, ti));
        }
    }
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.first().map(|&(d, _, wi, ti)| (ti, wi, d))
}
