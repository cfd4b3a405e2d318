//! Incremental quickhull over 3D points, used only for volume estimates.

use std::collections::HashMap;

use crate::scalar::{lit, Real};

use super::{Point3, Vector3};

/// Triangulated convex hull with outward-facing faces.
#[derive(Debug, Clone)]
pub struct ConvexHull<T: Real> {
    pub vertices: Vec<Point3<T>>,
    /// Counter-clockwise seen from outside.
    pub faces: Vec<[usize; 3]>,
}

impl<T: Real> ConvexHull<T> {
    pub fn volume(&self) -> T {
        let Some(origin) = self.vertices.first() else {
            return T::zero();
        };
        let six = lit::<T>(6.0);
        self.faces
            .iter()
            .map(|f| {
                let a = self.vertices[f[0]] - origin;
                let b = self.vertices[f[1]] - origin;
                let c = self.vertices[f[2]] - origin;
                a.dot(&b.cross(&c)) / six
            })
            .fold(T::zero(), |acc, v| acc + v)
    }
}

/// Volume of the convex hull; zero when the points span fewer than three
/// dimensions.
pub fn convex_hull_volume<T: Real>(points: &[Point3<T>]) -> T {
    convex_hull(points).map(|h| h.volume()).unwrap_or_else(T::zero)
}

/// Convex hull of `points`, or `None` when their affine dimension is below 3.
pub fn convex_hull<T: Real>(points: &[Point3<T>]) -> Option<ConvexHull<T>> {
    if points.len() < 4 {
        return None;
    }
    let scale = points
        .iter()
        .flat_map(|p| p.iter().map(|c| c.abs()))
        .fold(T::zero(), |a, b| a.max(b))
        .max(T::one());
    let mut eps = T::default_epsilon() * scale * lit(256.0);
    for _ in 0..4 {
        match Builder::hull(points, eps)? {
            Some(hull) => return Some(hull),
            // Inconsistent horizon from near-degenerate input: coarsen and retry.
            None => eps *= lit(16.0),
        }
    }
    log::warn!("convex hull did not stabilise; reporting no hull");
    None
}

struct Face<T: Real> {
    v: [usize; 3],
    normal: Vector3<T>,
    offset: T,
    /// Neighbor across edge `v[k] -> v[(k + 1) % 3]`.
    adj: [usize; 3],
    outside: Vec<usize>,
    alive: bool,
}

impl<T: Real> Face<T> {
    fn distance(&self, p: &Point3<T>) -> T {
        self.normal.dot(&p.coords) - self.offset
    }
}

struct Builder<'a, T: Real> {
    pts: &'a [Point3<T>],
    faces: Vec<Face<T>>,
    eps: T,
}

impl<'a, T: Real> Builder<'a, T> {
    /// Outer `None`: degenerate input. Inner `None`: topology failure.
    fn hull(pts: &'a [Point3<T>], eps: T) -> Option<Option<ConvexHull<T>>> {
        let simplex = initial_simplex(pts, eps)?;
        let mut b = Builder { pts, faces: Vec::new(), eps };
        let [a, bb, c, d] = simplex;
        let inner = Point3::from((pts[a].coords + pts[bb].coords + pts[c].coords + pts[d].coords) * lit::<T>(0.25));
        // Faces of the tetrahedron, oriented outward.
        let tris = [[a, bb, c], [a, d, bb], [bb, d, c], [c, d, a]];
        for t in tris {
            let mut t = t;
            let f = b.make_face(t);
            if f.distance(&inner) > T::zero() {
                t.swap(1, 2);
            }
            b.push_face(t);
        }
        if !b.link_all() {
            return Some(None);
        }
        let ids: Vec<usize> = (0..4).collect();
        let all: Vec<usize> = (0..pts.len()).filter(|i| !simplex.contains(i)).collect();
        b.assign(&all, &ids);
        Some(b.run())
    }

    fn make_face(&self, v: [usize; 3]) -> Face<T> {
        let (a, bb, c) = (self.pts[v[0]], self.pts[v[1]], self.pts[v[2]]);
        let n = (bb - a).cross(&(c - a));
        let len = n.norm();
        let normal = if len > T::zero() { n / len } else { n };
        Face { v, normal, offset: normal.dot(&a.coords), adj: [usize::MAX; 3], outside: Vec::new(), alive: true }
    }

    fn push_face(&mut self, v: [usize; 3]) -> usize {
        let f = self.make_face(v);
        self.faces.push(f);
        self.faces.len() - 1
    }

    fn link_all(&mut self) -> bool {
        let mut edges = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                edges.insert((f.v[k], f.v[(k + 1) % 3]), (fi, k));
            }
        }
        for fi in 0..self.faces.len() {
            for k in 0..3 {
                let (a, b) = (self.faces[fi].v[k], self.faces[fi].v[(k + 1) % 3]);
                match edges.get(&(b, a)) {
                    Some(&(other, _)) => self.faces[fi].adj[k] = other,
                    None => return false,
                }
            }
        }
        true
    }

    fn assign(&mut self, candidates: &[usize], faces: &[usize]) {
        for &p in candidates {
            let mut best: Option<(usize, T)> = None;
            for &fi in faces {
                let d = self.faces[fi].distance(&self.pts[p]);
                if d > self.eps && best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((fi, d));
                }
            }
            if let Some((fi, _)) = best {
                self.faces[fi].outside.push(p);
            }
        }
    }

    fn run(mut self) -> Option<ConvexHull<T>> {
        let mut stack: Vec<usize> = (0..self.faces.len()).collect();
        while let Some(fi) = stack.pop() {
            if !self.faces[fi].alive || self.faces[fi].outside.is_empty() {
                continue;
            }
            let apex = {
                let f = &self.faces[fi];
                let mut best = f.outside[0];
                let mut bd = f.distance(&self.pts[best]);
                for &p in &f.outside[1..] {
                    let d = f.distance(&self.pts[p]);
                    if d > bd {
                        bd = d;
                        best = p;
                    }
                }
                best
            };
            let ap = self.pts[apex];

            // Visible region: connected set of faces the apex is strictly above.
            let mut visible = vec![fi];
            let mut is_visible: HashMap<usize, bool> = HashMap::from([(fi, true)]);
            let mut i = 0;
            while i < visible.len() {
                let cur = visible[i];
                i += 1;
                for k in 0..3 {
                    let nb = self.faces[cur].adj[k];
                    if is_visible.contains_key(&nb) {
                        continue;
                    }
                    let vis = self.faces[nb].distance(&ap) > self.eps;
                    is_visible.insert(nb, vis);
                    if vis {
                        visible.push(nb);
                    }
                }
            }

            // Horizon edges, each with the hidden face across it.
            let mut horizon = Vec::new();
            for &vf in &visible {
                for k in 0..3 {
                    let nb = self.faces[vf].adj[k];
                    if !is_visible[&nb] {
                        horizon.push((self.faces[vf].v[k], self.faces[vf].v[(k + 1) % 3], nb));
                    }
                }
            }

            let mut orphans = Vec::new();
            for &vf in &visible {
                self.faces[vf].alive = false;
                orphans.append(&mut self.faces[vf].outside);
            }

            let mut by_start: HashMap<usize, usize> = HashMap::new();
            let mut by_end: HashMap<usize, usize> = HashMap::new();
            let mut new_faces = Vec::with_capacity(horizon.len());
            for &(a, b, hidden) in &horizon {
                let nf = self.push_face([a, b, apex]);
                if by_start.insert(a, nf).is_some() || by_end.insert(b, nf).is_some() {
                    return None;
                }
                self.faces[nf].adj[0] = hidden;
                let hk = (0..3).find(|&k| self.faces[hidden].v[k] == b && self.faces[hidden].v[(k + 1) % 3] == a)?;
                self.faces[hidden].adj[hk] = nf;
                new_faces.push(nf);
            }
            for &nf in &new_faces {
                let [a, b, _] = self.faces[nf].v;
                self.faces[nf].adj[1] = *by_start.get(&b)?;
                self.faces[nf].adj[2] = *by_end.get(&a)?;
            }

            orphans.retain(|&p| p != apex);
            self.assign(&orphans, &new_faces);
            stack.extend(new_faces.iter().copied());
        }

        let mut remap = HashMap::new();
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for f in self.faces.iter().filter(|f| f.alive) {
            let mut tri = [0; 3];
            for k in 0..3 {
                tri[k] = *remap.entry(f.v[k]).or_insert_with(|| {
                    vertices.push(self.pts[f.v[k]]);
                    vertices.len() - 1
                });
            }
            faces.push(tri);
        }
        Some(ConvexHull { vertices, faces })
    }
}

fn initial_simplex<T: Real>(pts: &[Point3<T>], eps: T) -> Option<[usize; 4]> {
    // Extreme points along each axis; pick the farthest pair as the base edge.
    let mut extremes = Vec::with_capacity(6);
    for a in 0..3 {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in pts.iter().enumerate() {
            if p[a] < pts[lo][a] {
                lo = i;
            }
            if p[a] > pts[hi][a] {
                hi = i;
            }
        }
        extremes.push(lo);
        extremes.push(hi);
    }
    let mut best = (extremes[0], extremes[1], T::zero());
    for &i in &extremes {
        for &j in &extremes {
            let d = (pts[i] - pts[j]).norm_squared();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (p0, p1, d01) = best;
    if d01.sqrt() <= eps {
        return None;
    }
    let axis = (pts[p1] - pts[p0]).normalize();
    let (mut p2, mut d2) = (usize::MAX, T::zero());
    for (i, p) in pts.iter().enumerate() {
        let v = p - pts[p0];
        let d = (v - axis * v.dot(&axis)).norm();
        if d > d2 {
            d2 = d;
            p2 = i;
        }
    }
    if d2 <= eps {
        return None;
    }
    let n = (pts[p1] - pts[p0]).cross(&(pts[p2] - pts[p0])).normalize();
    let (mut p3, mut d3) = (usize::MAX, T::zero());
    for (i, p) in pts.iter().enumerate() {
        let d = n.dot(&(p - pts[p0])).abs();
        if d > d3 {
            d3 = d;
            p3 = i;
        }
    }
    if d3 <= eps {
        return None;
    }
    Some([p0, p1, p2, p3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_corners() -> Vec<Point3<f64>> {
        let mut v = Vec::new();
        for i in 0..8 {
            v.push(Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
        }
        v
    }

    #[test]
    fn cube_volume() {
        assert!((convex_hull_volume(&cube_corners()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coplanar_and_small_inputs_are_zero() {
        let planar = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        assert_eq!(convex_hull_volume(&planar), 0.0);
        assert_eq!(convex_hull_volume(&planar[..3]), 0.0);
        let collinear: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert_eq!(convex_hull_volume(&collinear), 0.0);
        let same = vec![Point3::new(1.0, 1.0, 1.0); 20];
        assert_eq!(convex_hull_volume(&same), 0.0);
    }

    #[test]
    fn tetrahedron_matches_determinant() {
        let p = [
            Point3::<f64>::new(0.1, 0.2, 0.3),
            Point3::new(1.4, 0.1, -0.2),
            Point3::new(0.3, 1.7, 0.5),
            Point3::new(0.2, 0.4, 2.1),
        ];
        let det = (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))).abs() / 6.0;
        assert!((convex_hull_volume(&p) - det).abs() < 1e-12);
    }

    /// Brute-force oracle for points in general position: every triple whose
    /// plane has all other points on one side is a hull facet.
    fn brute_force_volume(pts: &[Point3<f64>]) -> f64 {
        let n = pts.len();
        let centroid = Point3::from(pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64);
        let mut vol = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let nrm = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                    let side: Vec<f64> = (0..n)
                        .filter(|&m| m != i && m != j && m != k)
                        .map(|m| nrm.dot(&(pts[m] - pts[i])))
                        .collect();
                    if side.iter().all(|&s| s <= 0.0) || side.iter().all(|&s| s >= 0.0) {
                        let t = (pts[i] - centroid).dot(&(pts[j] - centroid).cross(&(pts[k] - centroid)));
                        vol += t.abs() / 6.0;
                    }
                }
            }
        }
        vol
    }

    #[test]
    fn matches_brute_force_on_random_sphere_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(5..25);
            let pts: Vec<Point3<f64>> = (0..n)
                .map(|_| {
                    let v = Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    Point3::from(v.normalize() * rng.random_range(0.5..1.5))
                })
                .collect();
            let fast = convex_hull_volume(&pts);
            let slow = brute_force_volume(&pts);
            assert!((fast - slow).abs() < 1e-9 * slow.max(1.0), "{fast} vs {slow}");
        }
    }

    #[test]
    fn sphere_interior_samples_converge_from_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = Vec::new();
        while pts.len() < 10_000 {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if v.norm() <= 1.0 {
                pts.push(Point3::from(v));
            }
        }
        let v = convex_hull_volume(&pts);
        let exact = 4.0 / 3.0 * std::f64::consts::PI;
        // Expected deficit at n = 10k is about 4.5% (scales as n^-1/2).
        assert!(v <= exact);
        assert!((exact - v) / exact < 0.06, "hull {v}");
    }

    #[test]
    fn sphere_surface_samples_approach_analytic_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = Vec::new();
        while pts.len() < 10_000 {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                pts.push(Point3::from(v / n));
            }
        }
        let v = convex_hull_volume(&pts);
        let exact = 4.0 / 3.0 * std::f64::consts::PI;
        assert!(v <= exact);
        assert!((exact - v) / exact < 0.01, "hull {v}");
    }

    #[test]
    fn hull_contains_all_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point3<f64>> =
            (0..2000).map(|_| Point3::new(rng.random(), rng.random::<f64>() * 2.0, rng.random::<f64>() * 0.5)).collect();
        let hull = convex_hull(&pts).unwrap();
        for f in &hull.faces {
            let a = hull.vertices[f[0]];
            let n = (hull.vertices[f[1]] - a).cross(&(hull.vertices[f[2]] - a));
            for p in &pts {
                assert!(n.dot(&(p - a)) <= 1e-9);
            }
        }
        assert!(hull.volume() <= 1.0 + 1e-9);
    }

    #[test]
    fn grid_with_many_coplanar_points() {
        let mut pts = Vec::new();
        for i in 0..=10 {
            for j in 0..=10 {
                for k in 0..=10 {
                    pts.push(Point3::new(i as f64 * 0.1, j as f64 * 0.1, k as f64 * 0.1));
                }
            }
        }
        assert!((convex_hull_volume(&pts) - 1.0).abs() < 1e-9);
    }
}
