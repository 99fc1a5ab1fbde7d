//! Pose-dependent marker measurement noise and camera-relative geometry.

use nalgebra::{Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::dh::Pose;
use crate::error::{Error, Result};

/// Lower bound applied to a variance before it becomes a covariance.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Pinhole-free camera: where it is, where it looks, and how wide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub position: Vector3<f64>,
    optical_axis: Vector3<f64>,
    /// Half-angle of the viewing cone (deg).
    pub fov_half_angle: f64,
}

impl CameraModel {
    /// `optical_axis` is normalized here; it only has to be nonzero.
    pub fn new(position: Vector3<f64>, optical_axis: Vector3<f64>, fov_half_angle: f64) -> Result<Self> {
        let norm = optical_axis.norm();
        if !(norm.is_finite() && norm > 0.0) || position.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("camera position/axis must be finite and nonzero".into()));
        }
        if !(fov_half_angle > 0.0 && fov_half_angle < 90.0) {
            return Err(Error::InvalidParameter(format!(
                "fov half-angle {fov_half_angle} deg outside (0, 90)"
            )));
        }
        Ok(Self {
            position,
            optical_axis: optical_axis / norm,
            fov_half_angle,
        })
    }

    /// Camera at `position` looking at `target`.
    pub fn looking_at(position: Vector3<f64>, target: Vector3<f64>, fov_half_angle: f64) -> Result<Self> {
        Self::new(position, target - position, fov_half_angle)
    }

    pub fn optical_axis(&self) -> Vector3<f64> {
        self.optical_axis
    }

    /// Angle (deg) between the optical axis and the ray to `point`.
    pub fn off_axis_angle(&self, point: &Vector3<f64>) -> Result<f64> {
        let ray = point - self.position;
        let dist = ray.norm();
        if dist <= f64::EPSILON {
            return Err(Error::Degenerate("point coincides with the camera".into()));
        }
        Ok(angle_between_deg(&self.optical_axis, &(ray / dist)))
    }
}

fn angle_between_deg(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    // atan2 keeps precision near 0 and 180
    u.cross(v).norm().atan2(u.dot(v)).to_degrees()
}

/// Coefficients of `σ² = a·r² + b·(φ − 45)²` plus the constant-noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    /// Variance per m².
    pub noise_a: f64,
    /// Variance per deg².
    pub noise_b: f64,
    /// Variance assumed by the constant-noise ablation.
    pub constant_sigma2: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            noise_a: 4e-4,
            noise_b: 5e-6,
            constant_sigma2: 1e-3,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("noise_a", self.noise_a),
            ("noise_b", self.noise_b),
            ("constant_sigma2", self.constant_sigma2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Variance the estimator is told about under `mode`.
    pub fn assumed_variance(&self, mode: NoiseMode, r: f64, phi: f64) -> f64 {
        match mode {
            NoiseMode::PoseDependent => predict_variance(r, phi, self),
            NoiseMode::Constant => self.constant_sigma2,
        }
    }
}

/// How the estimator models measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Pose-dependent noise (PDN).
    #[default]
    #[serde(rename = "pdn")]
    PoseDependent,
    /// Constant noise (CN).
    #[serde(rename = "cn")]
    Constant,
}

impl NoiseMode {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseMode::PoseDependent => "pdn",
            NoiseMode::Constant => "cn",
        }
    }
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pdn" => Ok(NoiseMode::PoseDependent),
            "cn" => Ok(NoiseMode::Constant),
            other => Err(Error::Config(format!("unknown noise mode {other:?} (expected pdn or cn)"))),
        }
    }
}

/// Distance `r` (m) from camera to marker and view angle `φ` (deg) between the
/// marker's outward normal (+z of its frame) and the direction to the camera.
pub fn camera_geometry(camera: &CameraModel, marker: &Pose) -> Result<(f64, f64)> {
    let to_camera = camera.position - marker.position;
    let r = to_camera.norm();
    if r <= f64::EPSILON {
        return Err(Error::Degenerate("marker coincides with the camera".into()));
    }
    let normal: Vector3<f64> = marker.orientation.column(2).into();
    Ok((r, angle_between_deg(&normal, &(to_camera / r))))
}

pub fn predict_variance(r: f64, phi: f64, params: &NoiseParams) -> f64 {
    params.noise_a * r * r + params.noise_b * (phi - 45.0) * (phi - 45.0)
}

/// `σ²·I₆`, with `σ²` floored at [`VARIANCE_FLOOR`].
pub fn to_cov(sigma2: f64) -> Matrix6<f64> {
    Matrix6::identity() * sigma2.max(VARIANCE_FLOOR)
}
