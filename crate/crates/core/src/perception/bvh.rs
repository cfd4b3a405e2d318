//! Median-split bounding volume hierarchy over a point cloud.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, PointCloud};
use crate::scalar::{infinity, Real};

pub const DEFAULT_LEAF_CAPACITY: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Internal { left: usize, right: usize },
    /// Range into [`Bvh::order`].
    Leaf { start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvhNode<T: Real> {
    pub bounds: Aabb<T>,
    pub kind: NodeKind,
}

/// Result of a nearest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest<T: Real> {
    pub index: usize,
    pub distance: T,
}

/// Immutable BVH. Node 0 is the root.
#[derive(Debug, Clone)]
pub struct Bvh<T: Real> {
    points: Vec<Point3<T>>,
    nodes: Vec<BvhNode<T>>,
    order: Vec<usize>,
    leaf_capacity: usize,
    depth: usize,
}

impl<T: Real> Bvh<T> {
    pub fn build(cloud: &PointCloud<T>, leaf_capacity: usize) -> Result<Self> {
        Self::from_points(cloud.points.clone(), leaf_capacity)
    }

    pub fn from_points(points: Vec<Point3<T>>, leaf_capacity: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if leaf_capacity == 0 {
            return Err(Error::InvalidArgument("leaf_capacity must be at least 1".into()));
        }
        if points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidArgument("cloud contains non-finite coordinates".into()));
        }
        let mut bvh = Bvh {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
            leaf_capacity,
            depth: 0,
        };
        let n = bvh.points.len();
        bvh.nodes.reserve(2 * n.div_ceil(leaf_capacity));
        bvh.build_node(0, n, 0);
        Ok(bvh)
    }

    fn build_node(&mut self, start: usize, end: usize, depth: usize) -> usize {
        self.depth = self.depth.max(depth);
        let mut bounds = Aabb::empty();
        for &i in &self.order[start..end] {
            bounds.grow(&self.points[i]);
        }
        let id = self.nodes.len();
        self.nodes.push(BvhNode { bounds, kind: NodeKind::Leaf { start, end } });
        if end - start <= self.leaf_capacity {
            return id;
        }
        // Coincident points give a zero-length axis; the positional split still
        // halves the range.
        let axis = bounds.longest_axis();
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].partial_cmp(&pts[b][axis]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        });
        let left = self.build_node(start, mid, depth + 1);
        let right = self.build_node(mid, end, depth + 1);
        self.nodes[id].kind = NodeKind::Internal { left, right };
        id
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nodes(&self) -> &[BvhNode<T>] {
        &self.nodes
    }

    /// Permutation of point indices; leaves reference contiguous ranges of it.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn bounds(&self) -> &Aabb<T> {
        &self.nodes[0].bounds
    }

    /// Checks parent containment, leaf size and that leaves partition the
    /// index set.
    pub fn audit(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        let mut seen = vec![false; self.points.len()];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            match node.kind {
                NodeKind::Internal { left, right } => {
                    for c in [left, right] {
                        if !node.bounds.contains_box(&self.nodes[c].bounds) {
                            return fail(format!("node {id} does not contain child {c}"));
                        }
                        stack.push(c);
                    }
                }
                NodeKind::Leaf { start, end } => {
                    if end <= start || end - start > self.leaf_capacity {
                        return fail(format!("leaf {id} has {} points", end.saturating_sub(start)));
                    }
                    for &i in &self.order[start..end] {
                        if seen[i] {
                            return fail(format!("point {i} appears in two leaves"));
                        }
                        seen[i] = true;
                        if !node.bounds.contains_point(&self.points[i]) {
                            return fail(format!("leaf {id} box misses point {i}"));
                        }
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return fail(format!("point {i} is not in any leaf"));
        }
        Ok(())
    }

    /// Closest point to `q`; equal distances resolve to the lowest index.
    pub fn nearest(&self, q: &Point3<T>) -> Nearest<T> {
        self.nearest_counted(q).0
    }

    /// Like [`Bvh::nearest`], also returning the number of nodes visited.
    pub fn nearest_counted(&self, q: &Point3<T>) -> (Nearest<T>, usize) {
        let (hit, visited) = self.nearest_where(q, |_| true);
        (hit.expect("bvh is never empty"), visited)
    }

    /// Closest point accepted by `keep`, or `None` if no point qualifies.
    pub fn nearest_filtered(&self, q: &Point3<T>, keep: impl Fn(usize) -> bool) -> Option<Nearest<T>> {
        self.nearest_where(q, keep).0
    }

    fn nearest_where(&self, q: &Point3<T>, keep: impl Fn(usize) -> bool) -> (Option<Nearest<T>>, usize) {
        let mut best_d2 = infinity::<T>();
        let mut best_i = usize::MAX;
        let mut visited = 0;
        let mut stack = vec![(0usize, self.nodes[0].bounds.distance_squared_to_point(q))];
        while let Some((id, box_d2)) = stack.pop() {
            // Equal box distance may still hide a lower-index tie.
            if box_d2 > best_d2 {
                continue;
            }
            visited += 1;
            match self.nodes[id].kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        if !keep(i) {
                            continue;
                        }
                        let d2 = (self.points[i] - q).norm_squared();
                        if d2 < best_d2 || (d2 == best_d2 && i < best_i) {
                            best_d2 = d2;
                            best_i = i;
                        }
                    }
                }
                NodeKind::Internal { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared_to_point(q);
                    let dr = self.nodes[right].bounds.distance_squared_to_point(q);
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        let hit = (best_i != usize::MAX).then(|| Nearest { index: best_i, distance: best_d2.sqrt() });
        (hit, visited)
    }

    /// The `k` closest points sorted by `(distance, index)`.
    pub fn k_nearest(&self, q: &Point3<T>, k: usize) -> Vec<Nearest<T>> {
        let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        if k == 0 {
            return Vec::new();
        }
        let worse = |a: &(T, usize), b: &(T, usize)| a.0 > b.0 || (a.0 == b.0 && a.1 > b.1);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if best.len() == k && node.bounds.distance_squared_to_point(q) > best[k - 1].0 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let cand = ((self.points[i] - q).norm_squared(), i);
                        if best.len() == k && !worse(&best[k - 1], &cand) {
                            continue;
                        }
                        let pos = best.iter().position(|b| worse(b, &cand)).unwrap_or(best.len());
                        best.insert(pos, cand);
                        best.truncate(k);
                    }
                }
                NodeKind::Internal { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared_to_point(q);
                    let dr = self.nodes[right].bounds.distance_squared_to_point(q);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.into_iter().map(|(d2, index)| Nearest { index, distance: d2.sqrt() }).collect()
    }

    /// Indices of all points within `radius` of `q` (inclusive), ascending.
    pub fn radius_search(&self, q: &Point3<T>, radius: T) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds.distance_squared_to_point(q) > r2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    out.extend(self.order[start..end].iter().copied().filter(|&i| (self.points[i] - q).norm_squared() <= r2));
                }
                NodeKind::Internal { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Indices of points inside the closed box, ascending.
    pub fn points_in_box(&self, b: &Aabb<T>) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.bounds.overlaps(b) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    out.extend(self.order[start..end].iter().copied().filter(|&i| b.contains_point(&self.points[i])));
                }
                NodeKind::Internal { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Smallest point-to-box distance over the cloud; zero when a point lies
    /// inside `b`.
    pub fn distance_to_box(&self, b: &Aabb<T>) -> T {
        let mut best = infinity::<T>();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds.distance_squared_to_box(b) >= best {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let d2 = b.distance_squared_to_point(&self.points[i]);
                        if d2 < best {
                            best = d2;
                        }
                    }
                    if best == T::zero() {
                        break;
                    }
                }
                NodeKind::Internal { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared_to_box(b);
                    let dr = self.nodes[right].bounds.distance_squared_to_box(b);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.sqrt()
    }

    /// True iff some cloud point lies inside the closed box.
    pub fn collides(&self, b: &Aabb<T>) -> bool {
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.bounds.overlaps(b) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    if self.order[start..end].iter().any(|&i| b.contains_point(&self.points[i])) {
                        return true;
                    }
                }
                NodeKind::Internal { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
        (0..n).map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    fn scan(points: &[Point3<f64>], q: &Point3<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d2 = (p - q).norm_squared();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    #[test]
    fn small_cloud_is_single_leaf() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 3.0), Point3::new(-1.0, 0.5, 0.0)];
        let bvh = Bvh::from_points(pts.clone(), 16).unwrap();
        assert_eq!(bvh.nodes().len(), 1);
        assert_eq!(*bvh.bounds(), Aabb::from_points(&pts).unwrap());
        assert_eq!(bvh.depth(), 0);
    }

    #[test]
    fn audit_passes_on_random_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bvh = Bvh::from_points(random_points(&mut rng, 10_000), 16).unwrap();
        bvh.audit().unwrap();
        let bound = (10_000f64 / 16.0).log2().ceil() as usize + 1;
        assert!(bvh.depth() <= bound, "depth {}", bvh.depth());
    }

    #[test]
    fn duplicate_points_terminate() {
        let pts = vec![Point3::new(0.5, 0.5, 0.5); 1000];
        let bvh = Bvh::from_points(pts, 4).unwrap();
        bvh.audit().unwrap();
        assert_eq!(bvh.nearest(&Point3::new(0.0, 0.0, 0.0)).index, 0);
    }

    #[test]
    fn empty_and_zero_capacity_rejected() {
        assert!(matches!(Bvh::<f64>::from_points(vec![], 16), Err(Error::EmptyInput)));
        assert!(Bvh::from_points(vec![Point3::new(0.0, 0.0, 0.0)], 0).is_err());
    }

    #[test]
    fn nearest_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = random_points(&mut rng, 5000);
        let bvh = Bvh::from_points(pts.clone(), 16).unwrap();
        for _ in 0..1000 {
            let q = Point3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let hit = bvh.nearest(&q);
            let (i, d) = scan(&pts, &q);
            assert_eq!(hit.index, i);
            assert_eq!(hit.distance, d);
        }
        let hit = bvh.nearest(&pts[123]);
        assert_eq!((hit.index, hit.distance), (123, 0.0));
    }

    #[test]
    fn nearest_tie_prefers_lowest_index() {
        let pts = vec![Point3::new(1.0, 0.0, 0.0), Point3::new(-1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let bvh = Bvh::from_points(pts, 1).unwrap();
        assert_eq!(bvh.nearest(&Point3::origin()).index, 0);
        assert_eq!(bvh.nearest(&Point3::new(2.0, 0.0, 0.0)).index, 0);
    }

    #[test]
    fn box_distance_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 3000);
        let bvh = Bvh::from_points(pts.clone(), 8).unwrap();
        for _ in 0..300 {
            let c = Point3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let b = Aabb::from_center_half_extents(c, nalgebra::Vector3::new(0.05, 0.1, 0.02)).unwrap();
            let oracle = pts.iter().map(|p| b.distance_squared_to_point(p)).fold(f64::INFINITY, f64::min).sqrt();
            assert_eq!(bvh.distance_to_box(&b), oracle);
            assert_eq!(bvh.collides(&b), oracle == 0.0);
        }
    }

    #[test]
    fn box_distance_with_known_gap() {
        let pts: Vec<Point3<f64>> = (0..100).map(|i| Point3::new(1.0, (i % 10) as f64 * 0.1, (i / 10) as f64 * 0.1)).collect();
        let bvh = Bvh::from_points(pts, 16).unwrap();
        let b = Aabb::new(Point3::new(1.25, 0.0, 0.0), Point3::new(2.0, 0.9, 0.9)).unwrap();
        assert!((bvh.distance_to_box(&b) - 0.25).abs() < 1e-12);
        assert!(!bvh.collides(&b));
        let touching = Aabb::new(Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)).unwrap();
        assert!(bvh.collides(&touching));
        assert_eq!(bvh.distance_to_box(&touching), 0.0);
    }

    #[test]
    fn k_nearest_and_radius_match_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = random_points(&mut rng, 2000);
        let bvh = Bvh::from_points(pts.clone(), 16).unwrap();
        for _ in 0..100 {
            let q = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let mut all: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| ((p - q).norm_squared(), i)).collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let got: Vec<usize> = bvh.k_nearest(&q, 10).iter().map(|n| n.index).collect();
            let want: Vec<usize> = all[..10].iter().map(|a| a.1).collect();
            assert_eq!(got, want);

            let mut within: Vec<usize> = all.iter().filter(|a| a.0 <= 0.04).map(|a| a.1).collect();
            within.sort_unstable();
            assert_eq!(bvh.radius_search(&q, 0.2), within);
        }
    }

    #[test]
    fn filtered_nearest_skips_rejected() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(5.0, 0.0, 0.0)];
        let bvh = Bvh::from_points(pts, 1).unwrap();
        let hit = bvh.nearest_filtered(&Point3::origin(), |i| i != 0).unwrap();
        assert_eq!(hit.index, 1);
        assert!(bvh.nearest_filtered(&Point3::origin(), |_| false).is_none());
    }
}
