//! Comparison metrics: average hand position and orientation errors over a
//! random evaluation set, accumulated joint movement, and discard counts.

use nalgebra::Matrix3;
use rand::Rng;

use crate::dh::{DhTable, JointConfig, JointLimits};
use crate::error::{Error, Result};
use crate::so3;

/// Configurations drawn uniformly within the joint limits.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub configs: Vec<JointConfig>,
}

impl EvalSet {
    pub fn generate<R: Rng + ?Sized>(limits: &JointLimits, n: usize, rng: &mut R) -> Self {
        let configs = (0..n)
            .map(|_| {
                let u: Vec<f64> = (0..limits.len()).map(|_| rng.random::<f64>()).collect();
                limits.denormalize(&u).expect("length matches")
            })
            .collect();
        Self { configs }
    }
}

fn check_tables(est: &DhTable, truth: &DhTable) -> Result<()> {
    if est.joint_count() != truth.joint_count() {
        return Err(Error::DimensionMismatch {
            expected: truth.joint_count(),
            found: est.joint_count(),
        });
    }
    Ok(())
}

/// Mean Euclidean hand position error, in millimetres.
pub fn avg_position_error(est: &DhTable, truth: &DhTable, evals: &EvalSet) -> Result<f64> {
    Ok(avg_errors(est, truth, evals)?.0)
}

/// Mean geodesic hand orientation error, in degrees.
pub fn avg_orientation_error(est: &DhTable, truth: &DhTable, evals: &EvalSet) -> Result<f64> {
    Ok(avg_errors(est, truth, evals)?.1)
}

/// Both averages in one pass: (mm, deg).
pub fn avg_errors(est: &DhTable, truth: &DhTable, evals: &EvalSet) -> Result<(f64, f64)> {
    check_tables(est, truth)?;
    if evals.configs.is_empty() {
        return Err(Error::InvalidParameter("empty evaluation set".into()));
    }
    let (mut pos, mut rot) = (0.0, 0.0);
    for c in &evals.configs {
        if c.len() != truth.joint_count() {
            return Err(Error::DimensionMismatch {
                expected: truth.joint_count(),
                found: c.len(),
            });
        }
        let t = truth.chain_transform(c.angles());
        let e = est.chain_transform(c.angles());
        pos += (t.fixed_view::<3, 1>(0, 3) - e.fixed_view::<3, 1>(0, 3)).norm();
        let rt: Matrix3<f64> = t.fixed_view::<3, 3>(0, 0).into();
        let re: Matrix3<f64> = e.fixed_view::<3, 3>(0, 0).into();
        rot += rotation_distance(&rt, &re);
    }
    let n = evals.configs.len() as f64;
    Ok((pos / n * 1000.0, rot / n))
}

/// `sqrt(‖logm(Oᵀ·Ô)‖²_F / 2)` in degrees, i.e. the geodesic angle.
pub fn rotation_distance(o: &Matrix3<f64>, o_hat: &Matrix3<f64>) -> f64 {
    let w = so3::log(&(o.transpose() * o_hat));
    // ‖hat(w)‖_F² = 2‖w‖²
    (so3::hat(&w).norm_squared() / 2.0).sqrt().to_degrees()
}

/// Sum of l1 joint steps along `history`, in degrees.
pub fn accumulated_movement(history: &[JointConfig]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::InvalidParameter("empty configuration history".into()));
    }
    Ok(history
        .windows(2)
        .map(|w| step_deg(&w[0], &w[1]))
        .sum())
}

/// l1 distance between two configurations, in degrees.
pub fn step_deg(a: &JointConfig, b: &JointConfig) -> f64 {
    a.angles()
        .iter()
        .zip(b.angles())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        .to_degrees()
}

/// Mean and population standard deviation. Empty input gives `(NaN, NaN)`.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Number of attempts without a detection in one run's outcome log.
pub fn discarded_count(detections: &[bool]) -> usize {
    detections.iter().filter(|d| !**d).count()
}
