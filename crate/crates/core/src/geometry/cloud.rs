use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::Point3;

/// Ground-truth or inferred role of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointLabel {
    Object,
    Plane,
    Outlier,
}

impl PointLabel {
    /// Integer code used in PLY/CSV files.
    pub fn code(self) -> i32 {
        match self {
            PointLabel::Object => 0,
            PointLabel::Plane => 1,
            PointLabel::Outlier => 2,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(PointLabel::Object),
            1 => Some(PointLabel::Plane),
            2 => Some(PointLabel::Outlier),
            _ => None,
        }
    }
}

/// An ordered set of points with optional per-point labels.
///
/// Indices are stable: every operation that filters a cloud reports the
/// original indices it kept.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T: Real> {
    pub points: Vec<Point3<T>>,
    pub labels: Option<Vec<PointLabel>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Point3<T>>) -> Self {
        Self { points, labels: None }
    }

    pub fn with_labels(points: Vec<Point3<T>>, labels: Vec<PointLabel>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Dimension { expected: points.len(), got: labels.len() });
        }
        Ok(Self { points, labels: Some(labels) })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sub-cloud made of `indices`, labels carried along.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Indices whose label equals `label`; empty when the cloud is unlabeled.
    pub fn indices_with_label(&self, label: PointLabel) -> Vec<usize> {
        match &self.labels {
            Some(l) => (0..l.len()).filter(|&i| l[i] == label).collect(),
            None => Vec::new(),
        }
    }

    pub fn centroid(&self) -> Option<Point3<T>> {
        if self.points.is_empty() {
            return None;
        }
        let mut acc = nalgebra::Vector3::zeros();
        for p in &self.points {
            acc += p.coords;
        }
        Some(Point3::from(acc / crate::scalar::lit::<T>(self.points.len() as f64)))
    }
}
