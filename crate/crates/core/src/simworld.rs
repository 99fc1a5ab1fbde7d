//! Simulated ground truth: the true arm, two hand markers, a camera with a
//! rule-based visibility model, and a seeded noisy observation generator.
//!
//! Visibility is a stand-in for real self-occlusion and detector failures:
//! a marker is seen when it faces the camera closely enough, lies inside the
//! field of view, and (optionally) the hand is in front of the body.

use nalgebra::{Matrix4, Vector3, Vector6};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dh::{self, DhRow, DhTable, JointConfig, JointLimits, ObsVector, Pose};
use crate::error::{Error, Result};
use crate::estimator::Measurement;
use crate::noise::{self, CameraModel, NoiseMode, NoiseParams};
use crate::so3;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSpec {
    pub name: String,
    /// Hand frame → marker frame. The marker's outward normal is its +z axis.
    pub offset: Matrix4<f64>,
}

impl MarkerSpec {
    pub fn new(name: impl Into<String>, offset: Matrix4<f64>) -> Result<Self> {
        if !dh::is_rigid(&offset, 1e-9) {
            return Err(Error::InvalidParameter("marker offset is not a rigid transform".into()));
        }
        Ok(Self {
            name: name.into(),
            offset,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityRule {
    /// Largest view angle φ (deg) at which a marker is still detected.
    pub max_view_angle: f64,
    /// Hand x must be negative (the body's x axis points backwards).
    pub require_frontal_workspace: bool,
}

impl Default for VisibilityRule {
    fn default() -> Self {
        Self {
            max_view_angle: 80.0,
            require_frontal_workspace: true,
        }
    }
}

impl VisibilityRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_view_angle > 0.0 && self.max_view_angle <= 90.0) {
            return Err(Error::InvalidParameter(format!(
                "max_view_angle {} outside (0, 90]",
                self.max_view_angle
            )));
        }
        Ok(())
    }
}

/// Everything the simulated robot knows that the estimator does not.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub true_table: DhTable,
    pub limits: JointLimits,
    pub markers: Vec<MarkerSpec>,
    pub camera: CameraModel,
    pub noise: NoiseParams,
    pub visibility: VisibilityRule,
}

/// Outcome of one sampling attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Detected { measurement: Measurement, marker: usize },
    NoDetection,
}

impl Observation {
    pub fn is_detected(&self) -> bool {
        matches!(self, Observation::Detected { .. })
    }
}

pub fn is_visible(
    marker_pose: &Pose,
    camera: &CameraModel,
    rule: &VisibilityRule,
    hand_position: &Vector3<f64>,
) -> bool {
    if rule.require_frontal_workspace && hand_position.x >= 0.0 {
        return false;
    }
    let Ok((_, phi)) = noise::camera_geometry(camera, marker_pose) else {
        return false;
    };
    let Ok(off_axis) = camera.off_axis_angle(&marker_pose.position) else {
        return false;
    };
    phi <= rule.max_view_angle && off_axis <= camera.fov_half_angle
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        if self.markers.is_empty() {
            return Err(Error::InvalidParameter("world has no markers".into()));
        }
        if self.true_table.joint_count() != self.limits.len() {
            return Err(Error::DimensionMismatch {
                expected: self.true_table.joint_count(),
                found: self.limits.len(),
            });
        }
        self.noise.validate()?;
        self.visibility.validate()
    }

    pub fn joint_count(&self) -> usize {
        self.limits.len()
    }

    pub fn hand_pose(&self, theta: &JointConfig) -> Result<Pose> {
        dh::forward_kinematics(&self.true_table, theta)
    }

    /// Attempts to observe a marker at `theta`.
    ///
    /// Among visible markers the one with the lower true variance is used.
    /// The observation is corrupted with `N(0, σ²I)`; the covariance handed to
    /// the estimator is `σ²I` under [`NoiseMode::PoseDependent`] and the
    /// constant variance otherwise. The noise draw does not depend on `mode`.
    pub fn sample_observation<R: Rng + ?Sized>(
        &self,
        theta: &JointConfig,
        mode: NoiseMode,
        rng: &mut R,
    ) -> Result<Observation> {
        let hand = self.hand_pose(theta)?;
        let mut chosen: Option<(usize, Pose, f64)> = None;
        for (i, m) in self.markers.iter().enumerate() {
            let pose = hand.compose(&m.offset);
            if !is_visible(&pose, &self.camera, &self.visibility, &hand.position) {
                continue;
            }
            let (r, phi) = noise::camera_geometry(&self.camera, &pose)?;
            let s2 = noise::predict_variance(r, phi, &self.noise);
            if chosen.as_ref().is_none_or(|c| s2 < c.2) {
                chosen = Some((i, pose, s2));
            }
        }
        // Fixed draw count per call keeps the stream aligned across outcomes.
        let draws: [f64; 6] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let Some((marker, pose, s2)) = chosen else {
            return Ok(Observation::NoDetection);
        };

        let sigma = s2.sqrt();
        let truth = dh::pose_to_obs(&pose);
        let noisy = truth.0 + Vector6::from_column_slice(&draws) * sigma;
        let w = so3::log(&so3::exp(&noisy.fixed_rows::<3>(3).into()));
        let z = ObsVector(Vector6::new(noisy[0], noisy[1], noisy[2], w.x, w.y, w.z));

        let (r, phi) = noise::camera_geometry(&self.camera, &pose)?;
        let assumed = self.noise.assumed_variance(mode, r, phi);
        Ok(Observation::Detected {
            measurement: Measurement {
                z,
                r: noise::to_cov(assumed),
                theta: theta.clone(),
                tool: self.markers[marker].offset,
            },
            marker,
        })
    }
}

/// Widths (full, centered on the truth) of the uniform initial-estimate distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitWidths {
    /// m
    pub linear: f64,
    /// rad
    pub angular: f64,
}

impl Default for InitWidths {
    fn default() -> Self {
        Self {
            linear: 0.046,
            angular: 54f64.to_radians(),
        }
    }
}

/// Draws an initial DH estimate uniformly around `truth`.
pub fn perturb_initial_estimate<R: Rng + ?Sized>(truth: &DhTable, widths: InitWidths, rng: &mut R) -> DhTable {
    let params = truth.to_params();
    let perturbed = params.map_with_location(|i, _, v| {
        let w = if dh::is_angular(i) { widths.angular } else { widths.linear };
        if w > 0.0 {
            v + rng.random_range(-w / 2.0..=w / 2.0)
        } else {
            v
        }
    });
    truth.with_params(&perturbed).expect("same layout as truth")
}

/// Rows of the shipped example arm (iCub-like right arm, shoulder to wrist).
pub fn example_arm_rows() -> Vec<DhRow> {
    use std::f64::consts::FRAC_PI_2 as H;
    vec![
        DhRow::new(0.0, 0.10774, -H, H),
        DhRow::new(0.0, 0.0, H, -H),
        DhRow::new(-0.015, 0.15228, -H, 75f64.to_radians()),
        DhRow::new(0.015, 0.0, H, 0.0),
        DhRow::new(0.0, 0.1373, H, -H),
        DhRow::new(0.0, 0.0, H, H),
        DhRow::new(0.0625, -0.016, 0.0, 0.0),
    ]
}

/// Fixed transform from the body root to the first arm joint for the
/// example arm (torso joints frozen at zero).
pub fn example_arm_base() -> Matrix4<f64> {
    use std::f64::consts::FRAC_PI_2 as H;
    let root = Matrix4::new(
        0.0, -1.0, 0.0, 0.0, //
        0.0, 0.0, -1.0, 0.0, //
        1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    );
    let torso = [
        DhRow::new(0.032, 0.0, H, 0.0),
        DhRow::new(0.0, -0.0055, H, -H),
        DhRow::new(0.0233647, -0.1433, -H, 105f64.to_radians()),
    ];
    torso.iter().fold(root, |t, row| t * dh::dh_transform(row, 0.0))
}

/// Joint limits (rad) of the example arm.
pub fn example_arm_limits() -> JointLimits {
    let deg = [
        (-95.0, 10.0),
        (0.0, 160.0),
        (-37.0, 100.0),
        (15.0, 106.0),
        (-90.0, 90.0),
        (-90.0, 10.0),
        (-20.0, 40.0),
    ];
    JointLimits::new(deg.iter().map(|&(a, b): &(f64, f64)| (a.to_radians(), b.to_radians())).collect())
        .expect("valid limits")
}

/// Palm and back-of-hand markers, 2.5 cm either side of the hand frame origin.
pub fn example_markers() -> Vec<MarkerSpec> {
    let palm = Matrix4::new_translation(&Vector3::new(0.0, 0.0, 0.025));
    let mut back = Matrix4::identity();
    back.fixed_view_mut::<3, 3>(0, 0).copy_from(&so3::rot_x(std::f64::consts::PI));
    back[(2, 3)] = -0.025;
    vec![
        MarkerSpec::new("palm", palm).expect("rigid"),
        MarkerSpec::new("back", back).expect("rigid"),
    ]
}

pub fn example_camera() -> CameraModel {
    CameraModel::looking_at(Vector3::new(-0.06, 0.0, 0.34), Vector3::new(-0.14, -0.24, 0.21), 45.0).expect("valid camera")
}

impl Default for GroundTruth {
    fn default() -> Self {
        Self {
            true_table: DhTable::new(example_arm_rows(), example_arm_base()).expect("valid table"),
            limits: example_arm_limits(),
            markers: example_markers(),
            camera: example_camera(),
            noise: NoiseParams::default(),
            visibility: VisibilityRule::default(),
        }
    }
}
