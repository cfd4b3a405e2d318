//! Synthetic cylinder and block scenes with ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_aabb, transform_aabb, Aabb, Point3, PointCloud, PointLabel, Ray, RigidTransform, TransformMode, Unit, Vector3};

/// Object geometry in its own frame. Cylinders run along the local x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectShape {
    Cylinder { radius: f64, height: f64 },
    Block { lx: f64, ly: f64, lz: f64 },
}

impl Default for ObjectShape {
    fn default() -> Self {
        ObjectShape::Cylinder { radius: 0.025, height: 0.10 }
    }
}

impl ObjectShape {
    pub fn default_block() -> Self {
        ObjectShape::Block { lx: 0.10, ly: 0.05, lz: 0.05 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ObjectShape::Cylinder { .. } => "cylinder",
            ObjectShape::Block { .. } => "block",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims: &[f64] = match self {
            ObjectShape::Cylinder { radius, height } => &[*radius, *height],
            ObjectShape::Block { lx, ly, lz } => &[*lx, *ly, *lz],
        };
        if dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::Validation(format!("{} dimensions must be positive", self.label())));
        }
        Ok(())
    }

    pub fn local_bounds(&self) -> Aabb<f64> {
        let h = match *self {
            ObjectShape::Cylinder { radius, height } => Vector3::new(height / 2.0, radius, radius),
            ObjectShape::Block { lx, ly, lz } => Vector3::new(lx / 2.0, ly / 2.0, lz / 2.0),
        };
        Aabb::from_center_half_extents(Point3::origin(), h).expect("validated dimensions")
    }

    /// Negative inside, positive outside.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        let qa = match *self {
            ObjectShape::Cylinder { radius, height } => {
                let rho = (p.y * p.y + p.z * p.z).sqrt();
                vec![p.x.abs() - height / 2.0, rho - radius]
            }
            ObjectShape::Block { lx, ly, lz } => vec![p.x.abs() - lx / 2.0, p.y.abs() - ly / 2.0, p.z.abs() - lz / 2.0],
        };
        let outside = qa.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
        let inside = qa.iter().copied().fold(f64::NEG_INFINITY, f64::max).min(0.0);
        outside + inside
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            ObjectShape::Cylinder { radius, height } => 2.0 * std::f64::consts::PI * radius * (height + radius),
            ObjectShape::Block { lx, ly, lz } => 2.0 * (lx * ly + ly * lz + lz * lx),
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            ObjectShape::Cylinder { radius, height } => std::f64::consts::PI * radius * radius * height,
            ObjectShape::Block { lx, ly, lz } => lx * ly * lz,
        }
    }

    /// Area-uniform surface sample with its outward normal.
    pub fn sample_surface<R: Rng>(&self, rng: &mut R) -> (Point3<f64>, Vector3<f64>) {
        match *self {
            ObjectShape::Cylinder { radius, height } => {
                let side = 2.0 * std::f64::consts::PI * radius * height;
                let cap = std::f64::consts::PI * radius * radius;
                let u = rng.random::<f64>() * (side + 2.0 * cap);
                if u < side {
                    let th = rng.random::<f64>() * std::f64::consts::TAU;
                    let x = (rng.random::<f64>() - 0.5) * height;
                    let n = Vector3::new(0.0, th.cos(), th.sin());
                    (Point3::new(x, radius * n.y, radius * n.z), n)
                } else {
                    let sign = if u < side + cap { 1.0 } else { -1.0 };
                    let rho = radius * rng.random::<f64>().sqrt();
                    let th = rng.random::<f64>() * std::f64::consts::TAU;
                    (Point3::new(sign * height / 2.0, rho * th.cos(), rho * th.sin()), Vector3::new(sign, 0.0, 0.0))
                }
            }
            ObjectShape::Block { lx, ly, lz } => {
                let h = [lx / 2.0, ly / 2.0, lz / 2.0];
                let areas = [ly * lz, lx * lz, lx * ly];
                let total = 2.0 * areas.iter().sum::<f64>();
                let mut u = rng.random::<f64>() * total;
                let mut face = 0;
                while face < 5 && u >= areas[face / 2] {
                    u -= areas[face / 2];
                    face += 1;
                }
                let axis = face / 2;
                let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                let mut p = [0.0; 3];
                for (a, v) in p.iter_mut().enumerate() {
                    *v = if a == axis { sign * h[a] } else { (rng.random::<f64>() * 2.0 - 1.0) * h[a] };
                }
                let mut n = Vector3::zeros();
                n[axis] = sign;
                (Point3::new(p[0], p[1], p[2]), n)
            }
        }
    }

    /// Smallest `t >= 0` at which `o + t d` is inside the solid, if any.
    pub fn ray_entry(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let ray = Ray::new(*o, *d).ok()?;
        let (enter, exit) = match *self {
            ObjectShape::Block { .. } => {
                let hit = ray_aabb(&ray, &self.local_bounds())?;
                (hit.t_enter, hit.t_exit)
            }
            ObjectShape::Cylinder { radius, height } => {
                let slab = Aabb::new(Point3::new(-height / 2.0, -radius, -radius), Point3::new(height / 2.0, radius, radius)).ok()?;
                let hit = ray_aabb(&ray, &slab)?;
                let a = d.y * d.y + d.z * d.z;
                let b = 2.0 * (o.y * d.y + o.z * d.z);
                let c = o.y * o.y + o.z * o.z - radius * radius;
                let (t0, t1) = if a == 0.0 {
                    if c > 0.0 {
                        return None;
                    }
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    let disc = b * b - 4.0 * a * c;
                    if disc < 0.0 {
                        return None;
                    }
                    let s = disc.sqrt();
                    ((-b - s) / (2.0 * a), (-b + s) / (2.0 * a))
                };
                (hit.t_enter.max(t0), hit.t_exit.min(t1))
            }
        };
        (enter <= exit && exit >= 0.0).then_some(enter.max(0.0))
    }
}

/// Object placement in the palm frame: position plus a rotation vector
/// (axis times angle, radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectPose {
    pub position: [f64; 3],
    pub rotation: [f64; 3],
}

impl Default for ObjectPose {
    fn default() -> Self {
        Self { position: [0.0, 0.075, 0.045], rotation: [0.0; 3] }
    }
}

impl ObjectPose {
    pub fn to_transform(&self) -> Result<RigidTransform<f64>> {
        if self.position.iter().chain(self.rotation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("object pose must be finite".into()));
        }
        let rv = Vector3::from(self.rotation);
        let angle = rv.norm();
        let rot = if angle > 0.0 { RigidTransform::from_axis_angle(&Unit::new_normalize(rv), angle) } else { RigidTransform::identity() };
        Ok(RigidTransform::from_translation(Vector3::from(self.position)).compose(&rot))
    }
}

/// Named camera placements in the palm frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraPreset {
    Front,
    Wrist,
    Top,
    /// Fixed workspace camera at (0.40, 0, 0.70) m in world axes; the palm
    /// frame swaps world x into palm y and looks down world z.
    Experimental,
}

impl CameraPreset {
    pub const STANDARD: [CameraPreset; 3] = [CameraPreset::Front, CameraPreset::Wrist, CameraPreset::Top];

    pub fn position(self) -> Point3<f64> {
        match self {
            CameraPreset::Front => Point3::new(0.0, 0.36, -0.24),
            CameraPreset::Wrist => Point3::new(0.25, 0.30, -0.20),
            CameraPreset::Top => Point3::new(0.10, 0.28, -0.32),
            CameraPreset::Experimental => Point3::new(0.0, 0.40, -0.70),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraPreset::Front => "front",
            CameraPreset::Wrist => "wrist",
            CameraPreset::Top => "top",
            CameraPreset::Experimental => "experimental",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CameraPlacement {
    Preset(CameraPreset),
    Position([f64; 3]),
}

impl Default for CameraPlacement {
    fn default() -> Self {
        CameraPlacement::Preset(CameraPreset::Front)
    }
}

impl CameraPlacement {
    pub fn position(&self) -> Point3<f64> {
        match self {
            CameraPlacement::Preset(p) => p.position(),
            CameraPlacement::Position(p) => Point3::from(*p),
        }
    }

    pub fn label(&self) -> String {
        match self {
            CameraPlacement::Preset(p) => p.name().to_string(),
            CameraPlacement::Position(p) => format!("({:.3} {:.3} {:.3})", p[0], p[1], p[2]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub object: ObjectShape,
    pub object_pose: ObjectPose,
    pub camera: CameraPlacement,
    /// Surface samples drawn on the object before visibility culling. The
    /// support plane is sampled at the same areal density.
    pub camera_samples: usize,
    pub noise_sigma: f64,
    /// Fraction of the final cloud made of uniform clutter.
    pub outlier_fraction: f64,
    pub plane: bool,
    /// Margin by which the support plane extends past the object footprint.
    pub plane_margin: f64,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            object: ObjectShape::default(),
            object_pose: ObjectPose::default(),
            camera: CameraPlacement::default(),
            camera_samples: 6000,
            noise_sigma: 0.002,
            outlier_fraction: 0.01,
            plane: true,
            plane_margin: 0.06,
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        self.object.validate()?;
        self.object_pose.to_transform()?;
        if self.camera_samples == 0 {
            return Err(Error::Validation("camera_samples must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Validation("noise_sigma must be non-negative".into()));
        }
        if !(0.0..0.5).contains(&self.outlier_fraction) {
            return Err(Error::Validation("outlier_fraction must lie in [0, 0.5)".into()));
        }
        if !(self.plane_margin >= 0.0) {
            return Err(Error::Validation("plane_margin must be non-negative".into()));
        }
        if self.camera.position().iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("camera position must be finite".into()));
        }
        Ok(())
    }
}

/// Ground-truth object model in the palm frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub shape: ObjectShape,
    pub pose: RigidTransform<f64>,
    pub centroid: Point3<f64>,
    /// Height of the support plane (`z = plane_z`), when present.
    pub plane_z: Option<f64>,
}

impl SceneTruth {
    pub fn new(shape: ObjectShape, pose: RigidTransform<f64>) -> Self {
        Self { shape, pose, centroid: pose.position(), plane_z: None }
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.shape.signed_distance(&self.pose.inverse().transform_point(p))
    }

    pub fn bounds(&self) -> Aabb<f64> {
        transform_aabb(&self.pose, &self.shape.local_bounds(), TransformMode::CornerRefit)
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    /// Labeled palm-frame cloud.
    pub cloud: PointCloud<f64>,
    pub truth: SceneTruth,
    pub camera: Point3<f64>,
}

impl Scene {
    pub fn object_indices(&self) -> Vec<usize> {
        self.cloud.indices_with_label(PointLabel::Object)
    }
}

const VIS_EPS: f64 = 1e-9;

/// Samples the camera-visible object surface, an optional support plane
/// under it and uniform clutter, all with per-point labels.
pub fn synthesize_scene(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let pose = cfg.object_pose.to_transform()?;
    let inv = pose.inverse();
    let camera = cfg.camera.position();
    let cam_local = inv.transform_point(&camera);
    if cfg.object.signed_distance(&cam_local) <= 0.0 {
        return Err(Error::InvalidScene("camera lies inside the object".into()));
    }
    let mut truth = SceneTruth::new(cfg.object, pose);
    let bounds = truth.bounds();
    let plane = cfg.plane.then(|| {
        let m = cfg.plane_margin;
        (bounds.max.z, [bounds.min.x - m, bounds.max.x + m], [bounds.min.y - m, bounds.max.y + m])
    });
    truth.plane_z = plane.map(|p| p.0);
    if let Some((z, _, _)) = plane {
        if (camera.z - z).abs() < VIS_EPS {
            return Err(Error::InvalidScene("camera lies in the support plane".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let mut points = Vec::new();
    let mut labels = Vec::new();

    let blocked_by_plane = |p: &Point3<f64>| -> bool {
        let Some((z, xs, ys)) = plane else {
            return false;
        };
        let d = p - camera;
        if d.z == 0.0 {
            return false;
        }
        let t = (z - camera.z) / d.z;
        if !(t > VIS_EPS && t < 1.0 - VIS_EPS) {
            return false;
        }
        let hit = camera + d * t;
        (xs[0]..=xs[1]).contains(&hit.x) && (ys[0]..=ys[1]).contains(&hit.y)
    };
    let blocked_by_object = |p: &Point3<f64>| -> bool {
        let d = inv.transform_vector(&(p - camera));
        matches!(cfg.object.ray_entry(&cam_local, &d), Some(t) if t < 1.0 - 1e-7)
    };

    for _ in 0..cfg.camera_samples {
        let (local, _) = cfg.object.sample_surface(&mut rng);
        let p = pose.transform_point(&local);
        let jitter = Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        if blocked_by_object(&p) || blocked_by_plane(&p) {
            continue;
        }
        points.push(p + jitter);
        labels.push(PointLabel::Object);
    }

    if let Some((z, xs, ys)) = plane {
        let area = (xs[1] - xs[0]) * (ys[1] - ys[0]);
        let n = (cfg.camera_samples as f64 * area / cfg.object.surface_area()).round() as usize;
        for _ in 0..n {
            let p = Point3::new(rng.random_range(xs[0]..=xs[1]), rng.random_range(ys[0]..=ys[1]), z);
            let jitter = Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            if blocked_by_object(&p) || cfg.object.signed_distance(&inv.transform_point(&p)) <= 0.0 {
                continue;
            }
            points.push(p + jitter);
            labels.push(PointLabel::Plane);
        }
    }

    let surface = points.len();
    let f = cfg.outlier_fraction;
    let n_out = (f / (1.0 - f) * surface as f64).round() as usize;
    let clutter = bounds.inflate(0.05)?;
    for _ in 0..n_out {
        let p = Point3::new(
            rng.random_range(clutter.min.x..=clutter.max.x),
            rng.random_range(clutter.min.y..=clutter.max.y),
            rng.random_range(clutter.min.z..=clutter.max.z),
        );
        points.push(p);
        labels.push(PointLabel::Outlier);
    }
    if points.is_empty() {
        return Err(Error::InvalidScene("camera sees no surface".into()));
    }
    log::debug!("scene: {} visible surface points, {} clutter", surface, n_out);
    Ok(Scene { cloud: PointCloud::with_labels(points, labels)?, truth, camera })
}
