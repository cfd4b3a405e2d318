use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::scalar::Real;

use super::bvh::{Bvh, DEFAULT_LEAF_CAPACITY};

/// Connected component of the radius graph containing `seed`, ascending.
pub fn segment_region_growing<T: Real>(cloud: &PointCloud<T>, seed: usize, radius: T) -> Result<Vec<usize>> {
    if seed >= cloud.len() {
        return Err(Error::IndexOutOfRange { index: seed, len: cloud.len() });
    }
    let bvh = Bvh::build(cloud, DEFAULT_LEAF_CAPACITY)?;
    grow_region(&bvh, seed, radius)
}

/// Region growing over a prebuilt hierarchy.
pub fn grow_region<T: Real>(bvh: &Bvh<T>, seed: usize, radius: T) -> Result<Vec<usize>> {
    if seed >= bvh.len() {
        return Err(Error::IndexOutOfRange { index: seed, len: bvh.len() });
    }
    if !(radius > T::zero()) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let mut inside = vec![false; bvh.len()];
    inside[seed] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some(i) = queue.pop_front() {
        for j in bvh.radius_search(&bvh.points()[i], radius) {
            if !inside[j] {
                inside[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok((0..bvh.len()).filter(|&i| inside[i]).collect())
}

/// Default seed: the cloud point closest to `target`.
pub fn seed_near<T: Real>(bvh: &Bvh<T>, target: &Point3<T>) -> usize {
    bvh.nearest(target).index
}

/// Percentage of `truth` recovered by `predicted`; 100 when both are empty.
pub fn segmentation_accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let truth: HashSet<usize> = truth.iter().copied().collect();
    if truth.is_empty() {
        return if predicted.is_empty() { 100.0 } else { 0.0 };
    }
    let predicted: HashSet<usize> = predicted.iter().copied().collect();
    100.0 * predicted.intersection(&truth).count() as f64 / truth.len() as f64
}
