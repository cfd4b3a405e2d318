//! Spline resampling and velocity clipping of joint trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-stamped joint samples for one finger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub finger_id: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

impl JointTrajectory {
    pub fn new(finger_id: usize, times: Vec<f64>, positions: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(Error::Dimension { expected: times.len(), got: positions.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
        }
        if let Some(first) = positions.first() {
            if positions.iter().any(|q| q.len() != first.len()) {
                return Err(Error::InvalidArgument("every sample needs the same joint count".into()));
            }
        }
        Ok(Self { finger_id, times, positions })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Largest `|dq / dt| / limit` over all joints and segments.
    pub fn peak_rate_ratio(&self, velocity_limits: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.len() {
            let dt = self.times[i] - self.times[i - 1];
            for (j, lim) in velocity_limits.iter().enumerate() {
                worst = worst.max((self.positions[i][j] - self.positions[i - 1][j]).abs() / dt / lim);
            }
        }
        worst
    }
}

/// Natural cubic spline through `(x, y)` knots.
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                diag[i] = 2.0 * (h[i - 1] + h[i]);
                upper[i] = h[i];
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
            }
            for i in 2..n - 1 {
                let w = h[i - 1] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
            }
        }
        Self { x: x.to_vec(), y: y.to_vec(), m }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - t) / h;
        let b = (t - self.x[k]) / h;
        a * self.y[k] + b * self.y[k + 1] + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0
    }
}

/// Resamples `raw` on a cubic spline at uniform `dt`, then stretches every
/// segment whose joint rates exceed `velocity_limits`. The first and last
/// samples are reproduced exactly.
pub fn smooth_and_clip(raw: &JointTrajectory, velocity_limits: &[f64], dt: f64) -> Result<JointTrajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    if velocity_limits.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("velocity limits must be positive".into()));
    }
    if raw.len() < 2 {
        return Ok(raw.clone());
    }
    let dof = raw.positions[0].len();
    if velocity_limits.len() != dof {
        return Err(Error::Dimension { expected: dof, got: velocity_limits.len() });
    }

    let splines: Vec<Spline> = (0..dof)
        .map(|j| {
            let y: Vec<f64> = raw.positions.iter().map(|q| q[j]).collect();
            Spline::new(&raw.times, &y)
        })
        .collect();
    let t0 = raw.times[0];
    let t1 = *raw.times.last().expect("at least two samples");
    let steps = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    let mut samples: Vec<Vec<f64>> = (0..=steps)
        .map(|i| {
            let t = (t0 + i as f64 * dt).min(t1);
            splines.iter().map(|s| s.eval(t)).collect()
        })
        .collect();
    samples[0] = raw.positions[0].clone();
    samples[steps] = raw.positions[raw.len() - 1].clone();

    let mut times = Vec::with_capacity(samples.len());
    times.push(t0);
    for i in 1..samples.len() {
        let nominal = if i == steps { t1 - (t0 + (steps - 1) as f64 * dt) } else { dt };
        let needed = (0..dof).map(|j| (samples[i][j] - samples[i - 1][j]).abs() / velocity_limits[j]).fold(0.0, f64::max);
        times.push(times[i - 1] + nominal.max(needed));
    }
    JointTrajectory::new(raw.finger_id, times, samples)
}
