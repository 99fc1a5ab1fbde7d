//! Rotation-matrix helpers: exponential and principal logarithm maps.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;

/// Skew-symmetric matrix of `v`, so that `hat(v) * w == v.cross(&w)`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula.
pub fn exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let k = hat(omega);
    if theta < 1e-8 {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + a * k + b * k * k
}

/// Principal rotation vector (axis times angle, angle in `[0, π]`) of a
/// rotation matrix.
///
/// At exactly π the axis sign is ambiguous; the first nonzero axis component
/// is made positive.
pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // sin(theta) * axis
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) / 2.0;
    let sin = v.norm();
    let theta = sin.atan2(cos);

    if cos > -0.99 {
        if sin < 1e-300 {
            return Vector3::zeros();
        }
        let scale = if theta < 1e-6 {
            1.0 + theta * theta / 6.0
        } else {
            theta / sin
        };
        return v * scale;
    }

    // Near π: (R + Rᵀ)/2 - cos·I = (1 - cos)·a·aᵀ
    let one_minus = 1.0 - cos;
    let sym = (r + r.transpose()) / 2.0;
    let diag = Vector3::new(
        ((sym[(0, 0)] - cos) / one_minus).max(0.0),
        ((sym[(1, 1)] - cos) / one_minus).max(0.0),
        ((sym[(2, 2)] - cos) / one_minus).max(0.0),
    );
    let i = diag.imax();
    let ai = diag[i].sqrt();
    let mut axis = Vector3::zeros();
    for j in 0..3 {
        axis[j] = if j == i {
            ai
        } else {
            sym[(i, j)] / (one_minus * ai)
        };
    }
    axis.normalize_mut();

    if sin > 1e-12 {
        if axis.dot(&v) < 0.0 {
            axis = -axis;
        }
    } else if let Some(first) = axis.iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            axis = -axis;
        }
    }
    axis * theta.min(PI)
}

/// Geodesic angle (rad) of a rotation matrix, in `[0, π]`.
pub fn angle(r: &Matrix3<f64>) -> f64 {
    log(r).norm()
}

/// Orthonormality defect `‖RᵀR − I‖` (Frobenius).
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}
