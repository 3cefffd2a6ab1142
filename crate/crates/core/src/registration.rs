//! Rigid registration (point-to-point ICP) and cloud-to-cloud distances.
//!
//! ICP alternates exact nearest-neighbour correspondences with the
//! closed-form least-squares rigid fit (SVD of the cross-covariance with a
//! reflection guard). Scale is never estimated.

use nalgebra::{Matrix3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kdtree::KdTree;
use crate::util::mean_std;
use crate::{par, Point, Vector};

#[derive(Debug, Error, PartialEq)]
pub enum RegistrationError {
    #[error("need at least 3 source points, got {0}")]
    TooFewPoints(usize),
    #[error("target cloud is empty")]
    EmptyTarget,
    #[error("source points are collinear or coincident")]
    Degenerate,
    #[error("trim fraction {0} outside (0, 1]")]
    InvalidTrim(f64),
}

/// Proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    /// Row-major 3×3 rotation.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self::from_parts(&Matrix3::identity(), &Vector::zeros())
    }

    pub fn from_parts(r: &Matrix3<f64>, t: &Vector) -> Self {
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = r[(i, j)];
            }
        }
        RigidTransform { rotation, translation: [t.x, t.y, t.z] }
    }

    /// Rotation of `degrees` about +z followed by a translation.
    pub fn rotation_z(degrees: f64, translation: Vector) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&Vector::z_axis(), degrees.to_radians());
        Self::from_parts(r.matrix(), &translation)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }

    pub fn translation_vector(&self) -> Vector {
        Vector::from(self.translation)
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.rotation_matrix() * p.coords + self.translation_vector())
    }

    pub fn apply_all(&self, points: &[Point]) -> Vec<Point> {
        let r = self.rotation_matrix();
        let t = self.translation_vector();
        points.iter().map(|p| Point::from(r * p.coords + t)).collect()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation_matrix().transpose();
        Self::from_parts(&rt, &(-(rt * self.translation_vector())))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        let r = self.rotation_matrix();
        Self::from_parts(&(r * other.rotation_matrix()), &(r * other.translation_vector() + self.translation_vector()))
    }

    /// Largest absolute entry difference in R and t.
    pub fn max_difference(&self, other: &RigidTransform) -> f64 {
        let dr = (self.rotation_matrix() - other.rotation_matrix()).abs().max();
        let dt = (self.translation_vector() - other.translation_vector()).abs().max();
        dr.max(dt)
    }
}

/// Per-point distances with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub distances: Vec<f64>,
    pub mae: f64,
    pub std: f64,
}

impl ErrorStats {
    pub fn from_distances(distances: Vec<f64>) -> Self {
        let (mae, std) = mean_std(&distances);
        ErrorStats { distances, mae, std }
    }

    pub fn rms(&self) -> f64 {
        (self.distances.iter().map(|d| d * d).sum::<f64>() / self.distances.len().max(1) as f64).sqrt()
    }
}

/// Nearest-neighbour distance from every source point to the target.
pub fn c2c_distance(source: &[Point], target: &KdTree) -> Result<ErrorStats, RegistrationError> {
    if target.is_empty() {
        return Err(RegistrationError::EmptyTarget);
    }
    let distances = par::map_slice(source, |p| target.nearest(p).expect("non-empty").distance);
    Ok(ErrorStats::from_distances(distances))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop when the RMS residual changes by less than this (mm).
    pub tolerance: f64,
    /// Keep only this fraction of closest correspondences per iteration.
    /// `None` uses every correspondence.
    pub trim: Option<f64>,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig { max_iterations: 50, tolerance: 1e-6, trim: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps source points onto the target.
    pub transform: RigidTransform,
    pub rms: f64,
    pub initial_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_spread(points: &[Point]) -> Result<(), RegistrationError> {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigenvalues();
    let mut ev: Vec<f64> = eig.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    // rank < 2 means the points sit on a line
    if ev[0] <= 0.0 || ev[1] <= 1e-12 * ev[0] {
        return Err(RegistrationError::Degenerate);
    }
    Ok(())
}

/// Least-squares rigid transform mapping `src[i]` onto `dst[i]`.
pub fn best_fit_transform(src: &[Point], dst: &[Point]) -> Result<RigidTransform, RegistrationError> {
    assert_eq!(src.len(), dst.len());
    if src.len() < 3 {
        return Err(RegistrationError::TooFewPoints(src.len()));
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector::zeros(), |a, p| a + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s.coords - cs) * (d.coords - cd).transpose();
    }
    let svd = SVD::new(h, true, true);
    let u = svd.u.ok_or(RegistrationError::Degenerate)?;
    let v_t = svd.v_t.ok_or(RegistrationError::Degenerate)?;
    let mut r = v_t.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut fix = Matrix3::identity();
        fix[(2, 2)] = -1.0;
        r = v_t.transpose() * fix * u.transpose();
    }
    let t = cd - r * cs;
    Ok(RigidTransform::from_parts(&r, &t))
}

fn residual_rms(moved: &[Point], target: &KdTree) -> (f64, Vec<(usize, usize, f64)>) {
    let matches: Vec<(usize, usize, f64)> = par::map_range(moved.len(), |i| {
        let n = target.nearest(&moved[i]).expect("non-empty");
        (i, n.index, n.distance)
    });
    let rms = (matches.iter().map(|m| m.2 * m.2).sum::<f64>() / matches.len() as f64).sqrt();
    (rms, matches)
}

/// Rigidly aligns `source` to `target`. The returned transform is never
/// worse (by RMS residual) than the identity.
pub fn icp_align(source: &[Point], target: &KdTree, config: &IcpConfig) -> Result<IcpResult, RegistrationError> {
    if source.len() < 3 {
        return Err(RegistrationError::TooFewPoints(source.len()));
    }
    if target.is_empty() {
        return Err(RegistrationError::EmptyTarget);
    }
    if let Some(f) = config.trim {
        if !(f > 0.0 && f <= 1.0) {
            return Err(RegistrationError::InvalidTrim(f));
        }
    }
    check_spread(source)?;

    let mut current = RigidTransform::identity();
    let mut moved = source.to_vec();
    let (initial_rms, mut matches) = residual_rms(&moved, target);
    let mut best = (current, initial_rms);
    let mut prev_rms = initial_rms;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iterations {
        iterations += 1;
        if let Some(f) = config.trim {
            matches.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
            let keep = ((matches.len() as f64 * f).ceil() as usize).max(3);
            matches.truncate(keep);
        }
        let src: Vec<Point> = matches.iter().map(|m| moved[m.0]).collect();
        let dst: Vec<Point> = matches.iter().map(|m| target.points()[m.1]).collect();
        let step = best_fit_transform(&src, &dst)?;
        current = step.compose(&current);
        moved = current.apply_all(source);
        let (rms, next) = residual_rms(&moved, target);
        matches = next;
        if rms < best.1 {
            best = (current, rms);
        }
        if (prev_rms - rms).abs() < config.tolerance {
            converged = true;
            break;
        }
        prev_rms = rms;
    }
    Ok(IcpResult { transform: best.0, rms: best.1, initial_rms, iterations, converged })
}
