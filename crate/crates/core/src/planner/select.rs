use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::Bvh;
use crate::scalar::Real;

use super::rrt::FingerTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection<T: Real> {
    pub trajectory: usize,
    pub waypoint: usize,
    pub distance: T,
}

/// Waypoint closest to the cloud over all trajectories. Ties go to the
/// cheaper trajectory, then the earlier waypoint, then the earlier
/// trajectory.
pub fn select_endpoint<T: Real>(trajectories: &[FingerTrajectory<T>], bvh: &Bvh<T>) -> Result<Selection<T>> {
    let mut best: Option<(Selection<T>, T)> = None;
    for (ti, traj) in trajectories.iter().enumerate() {
        for (wi, p) in traj.waypoints.iter().enumerate() {
            let d = bvh.nearest(p).distance;
            let cand = (Selection { trajectory: ti, waypoint: wi, distance: d }, traj.cost);
            let better = match &best {
                None => true,
                Some(b) => rank(&cand, b) == Ordering::Less,
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best.map(|b| b.0).ok_or(Error::NoCandidates)
}

fn rank<T: Real>(a: &(Selection<T>, T), b: &(Selection<T>, T)) -> Ordering {
    let f = |x: T, y: T| x.partial_cmp(&y).unwrap_or(Ordering::Equal);
    f(a.0.distance, b.0.distance)
        .then(f(a.1, b.1))
        .then(a.0.waypoint.cmp(&b.0.waypoint))
        .then(a.0.trajectory.cmp(&b.0.trajectory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn traj(points: Vec<Point3<f64>>) -> FingerTrajectory<f64> {
        let cost = super::super::rrt::path_length(&points);
        FingerTrajectory { finger_id: 0, approach_start: points.len() - 1, waypoints: points, cost }
    }

    #[test]
    fn waypoint_on_cloud_point() {
        let bvh = Bvh::from_points(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)], 4).unwrap();
        let t = traj(vec![Point3::new(0.0, 2.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 1.0, 0.0)]);
        let s = select_endpoint(&[t], &bvh).unwrap();
        assert_eq!((s.trajectory, s.waypoint, s.distance), (0, 1, 0.0));
    }

    #[test]
    fn empty_is_error() {
        let bvh = Bvh::from_points(vec![Point3::new(0.0, 0.0, 0.0)], 4).unwrap();
        assert!(matches!(select_endpoint::<f64>(&[], &bvh), Err(Error::NoCandidates)));
    }

    #[test]
    fn ties_prefer_cheaper_trajectory() {
        let bvh = Bvh::from_points(vec![Point3::new(0.0, 0.0, 0.0)], 4).unwrap();
        let long = traj(vec![Point3::new(5.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)]);
        let short = traj(vec![Point3::new(0.0, 1.5, 0.0), Point3::new(0.0, 1.0, 0.0)]);
        let s = select_endpoint(&[long, short], &bvh).unwrap();
        assert_eq!((s.trajectory, s.waypoint), (1, 1));
    }
}
