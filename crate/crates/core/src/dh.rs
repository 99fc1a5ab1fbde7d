//! Denavit-Hartenberg chains: forward kinematics, pose observations, and the
//! observation Jacobian with respect to the flattened DH parameters.
//!
//! Rows use the classic convention `RotZ(θ + θ_off) · TransZ(d) · TransX(a) · RotX(α)`.
//! The parameter vector is row-major: `a, d, alpha, theta_off` for each joint.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::so3;

/// Parameters per joint in the flattened vector.
pub const PARAMS_PER_JOINT: usize = 4;

/// Default finite-difference step for [`observation_jacobian`].
pub const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    /// Link length (m).
    pub a: f64,
    /// Link offset (m).
    pub d: f64,
    /// Link twist (rad).
    pub alpha: f64,
    /// Joint angle offset (rad).
    pub theta_off: f64,
}

impl DhRow {
    pub fn new(a: f64, d: f64, alpha: f64, theta_off: f64) -> Self {
        Self {
            a,
            d,
            alpha,
            theta_off,
        }
    }

    fn is_finite(&self) -> bool {
        self.a.is_finite() && self.d.is_finite() && self.alpha.is_finite() && self.theta_off.is_finite()
    }
}

/// True when flattened parameter `index` is an angle (alpha or theta_off).
pub fn is_angular(index: usize) -> bool {
    index % PARAMS_PER_JOINT >= 2
}

/// Homogeneous transform of one DH row at the given joint angle.
pub fn dh_transform(row: &DhRow, joint_angle: f64) -> Matrix4<f64> {
    let (st, ct) = (joint_angle + row.theta_off).sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    Matrix4::new(
        ct, -st * ca, st * sa, row.a * ct, //
        st, ct * ca, -ct * sa, row.a * st, //
        0.0, sa, ca, row.d, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// A serial chain: DH rows plus the fixed world-to-first-joint transform.
#[derive(Debug, Clone, PartialEq)]
pub struct DhTable {
    pub rows: Vec<DhRow>,
    pub base: Matrix4<f64>,
}

impl DhTable {
    pub fn new(rows: Vec<DhRow>, base: Matrix4<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("DH table has no rows".into()));
        }
        if rows.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter("DH table has non-finite entries".into()));
        }
        if !is_rigid(&base, 1e-9) {
            return Err(Error::InvalidParameter("base transform is not rigid".into()));
        }
        Ok(Self { rows, base })
    }

    /// Table with an identity base transform.
    pub fn from_rows(rows: Vec<DhRow>) -> Result<Self> {
        Self::new(rows, Matrix4::identity())
    }

    pub fn joint_count(&self) -> usize {
        self.rows.len()
    }

    pub fn param_count(&self) -> usize {
        self.rows.len() * PARAMS_PER_JOINT
    }

    pub fn to_params(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.param_count(),
            self.rows.iter().flat_map(|r| [r.a, r.d, r.alpha, r.theta_off]),
        )
    }

    /// Same chain (and base) with the rows replaced by `params`.
    pub fn with_params(&self, params: &DVector<f64>) -> Result<Self> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        let rows = params
            .as_slice()
            .chunks_exact(PARAMS_PER_JOINT)
            .map(|c| DhRow::new(c[0], c[1], c[2], c[3]))
            .collect();
        Self::new(rows, self.base)
    }

    fn set_param(&mut self, index: usize, value: f64) {
        let row = &mut self.rows[index / PARAMS_PER_JOINT];
        match index % PARAMS_PER_JOINT {
            0 => row.a = value,
            1 => row.d = value,
            2 => row.alpha = value,
            _ => row.theta_off = value,
        }
    }

    fn param(&self, index: usize) -> f64 {
        let row = &self.rows[index / PARAMS_PER_JOINT];
        match index % PARAMS_PER_JOINT {
            0 => row.a,
            1 => row.d,
            2 => row.alpha,
            _ => row.theta_off,
        }
    }

    /// End-effector transform for raw joint angles. Lengths must already match.
    pub(crate) fn chain_transform(&self, angles: &[f64]) -> Matrix4<f64> {
        debug_assert_eq!(angles.len(), self.rows.len());
        self.rows
            .iter()
            .zip(angles)
            .fold(self.base, |t, (row, &q)| t * dh_transform(row, q))
    }

    /// Serialises the rows as text: one `a d alpha theta_off` line per joint.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&format!("{:e} {:e} {:e} {:e}\n", r.a, r.d, r.alpha, r.theta_off));
        }
        out
    }

    /// Parses the format written by [`DhTable::to_text`]. Blank lines and
    /// `#` comments are ignored. The base transform is identity.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        msg: format!("{tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != PARAMS_PER_JOINT {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 4 values, found {}", vals.len()),
                });
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "non-finite value".into(),
                });
            }
            rows.push(DhRow::new(vals[0], vals[1], vals[2], vals[3]));
        }
        Self::from_rows(rows)
    }
}

impl FromStr for DhTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_text(s)
    }
}

impl fmt::Display for DhTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub(crate) fn is_rigid(t: &Matrix4<f64>, tol: f64) -> bool {
    let r: Matrix3<f64> = t.fixed_view::<3, 3>(0, 0).into();
    t.iter().all(|v| v.is_finite())
        && so3::orthonormality_error(&r) <= tol
        && r.determinant() > 0.0
        && t[(3, 0)] == 0.0
        && t[(3, 1)] == 0.0
        && t[(3, 2)] == 0.0
        && t[(3, 3)] == 1.0
}

/// Per-joint `[min, max]` limits in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLimits {
    bounds: Vec<(f64, f64)>,
}

impl JointLimits {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidParameter("no joint limits".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "joint {i}: limits [{lo}, {hi}] are not an ordered finite interval"
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Maps normalized `[0,1]` coordinates to angles, clamping into range.
    pub fn denormalize(&self, unit: &[f64]) -> Result<JointConfig> {
        if unit.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: unit.len(),
            });
        }
        let angles = self
            .bounds
            .iter()
            .zip(unit)
            .map(|(&(lo, hi), &u)| (lo + u.clamp(0.0, 1.0) * (hi - lo)).clamp(lo, hi))
            .collect();
        Ok(JointConfig {
            angles,
            limits: self.clone(),
        })
    }

    /// Configuration with every joint at the middle of its range.
    pub fn center(&self) -> JointConfig {
        self.denormalize(&vec![0.5; self.len()]).expect("length matches")
    }
}

/// Joint angles (rad) together with the limits they respect.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    angles: Vec<f64>,
    limits: JointLimits,
}

impl JointConfig {
    pub fn new(angles: Vec<f64>, limits: JointLimits) -> Result<Self> {
        if angles.len() != limits.len() {
            return Err(Error::DimensionMismatch {
                expected: limits.len(),
                found: angles.len(),
            });
        }
        for (i, (&q, &(lo, hi))) in angles.iter().zip(limits.bounds()).enumerate() {
            if !(lo..=hi).contains(&q) {
                return Err(Error::InvalidParameter(format!(
                    "joint {i}: angle {q} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { angles, limits })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn limits(&self) -> &JointLimits {
        &self.limits
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn normalize(&self) -> Vec<f64> {
        self.angles
            .iter()
            .zip(self.limits.bounds())
            .map(|(&q, &(lo, hi))| (q - lo) / (hi - lo))
            .collect()
    }
}

/// Rigid pose: position (m) and rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Matrix3<f64>,
}

impl Pose {
    pub fn from_transform(t: &Matrix4<f64>) -> Self {
        Self {
            position: t.fixed_view::<3, 1>(0, 3).into(),
            orientation: t.fixed_view::<3, 3>(0, 0).into(),
        }
    }

    pub fn to_transform(&self) -> Matrix4<f64> {
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.orientation);
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        t
    }

    /// `self ∘ offset`, with `offset` expressed in this pose's frame.
    pub fn compose(&self, offset: &Matrix4<f64>) -> Pose {
        Pose::from_transform(&(self.to_transform() * offset))
    }
}

/// Six-component pose observation: position (m) then principal rotation vector (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsVector(pub Vector6<f64>);

impl ObsVector {
    pub fn position(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into()
    }

    pub fn rotation_vector(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into()
    }

    pub fn orientation(&self) -> Matrix3<f64> {
        so3::exp(&self.rotation_vector())
    }

    /// Residual `self ⊖ other`: position difference and the rotation vector
    /// of `O_self · O_otherᵀ`.
    pub fn residual(&self, other: &ObsVector) -> Vector6<f64> {
        let dp = self.position() - other.position();
        let dr = so3::log(&(self.orientation() * other.orientation().transpose()));
        Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
    }
}

pub fn forward_kinematics(table: &DhTable, theta: &JointConfig) -> Result<Pose> {
    if table.joint_count() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: table.joint_count(),
            found: theta.len(),
        });
    }
    Ok(Pose::from_transform(&table.chain_transform(theta.angles())))
}

pub fn pose_to_obs(pose: &Pose) -> ObsVector {
    let w = so3::log(&pose.orientation);
    let p = pose.position;
    ObsVector(Vector6::new(p.x, p.y, p.z, w.x, w.y, w.z))
}

/// `H = ∂h/∂x` (6 × 4n) at the hand frame.
pub fn observation_jacobian(table: &DhTable, theta: &JointConfig) -> Result<DMatrix<f64>> {
    observation_jacobian_with_tool(table, theta, &Matrix4::identity(), JACOBIAN_STEP)
}

/// Central-difference Jacobian of the pose of `hand · tool` with respect to
/// every DH parameter.
///
/// Position rows are plain differences. Orientation rows are differences in
/// the tangent space at the nominal orientation, `log(O(x ± h) · O(x)ᵀ)`, which
/// is the same chart the filter innovation uses.
pub fn observation_jacobian_with_tool(
    table: &DhTable,
    theta: &JointConfig,
    tool: &Matrix4<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    if table.joint_count() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: table.joint_count(),
            found: theta.len(),
        });
    }
    let n = table.joint_count();
    let q = theta.angles();

    // prefix[i] = base · A_0 ⋯ A_{i-1};  suffix[i] = A_i ⋯ A_{n-1} · tool
    let links: Vec<Matrix4<f64>> = table.rows.iter().zip(q).map(|(r, &a)| dh_transform(r, a)).collect();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(table.base);
    for l in &links {
        let next = prefix.last().unwrap() * l;
        prefix.push(next);
    }
    let mut suffix = vec![*tool; n + 1];
    for i in (0..n).rev() {
        suffix[i] = links[i] * suffix[i + 1];
    }

    let nominal = prefix[n] * tool;
    let r0t: Matrix3<f64> = nominal.fixed_view::<3, 3>(0, 0).transpose();

    let mut h = DMatrix::zeros(6, table.param_count());
    for j in 0..table.param_count() {
        let joint = j / PARAMS_PER_JOINT;
        let eval = |delta: f64| {
            let mut row = table.rows[joint];
            match j % PARAMS_PER_JOINT {
                0 => row.a += delta,
                1 => row.d += delta,
                2 => row.alpha += delta,
                _ => row.theta_off += delta,
            }
            prefix[joint] * dh_transform(&row, q[joint]) * suffix[joint + 1]
        };
        let plus = eval(step);
        let minus = eval(-step);
        for k in 0..3 {
            h[(k, j)] = (plus[(k, 3)] - minus[(k, 3)]) / (2.0 * step);
        }
        let rp: Matrix3<f64> = plus.fixed_view::<3, 3>(0, 0).into();
        let rm: Matrix3<f64> = minus.fixed_view::<3, 3>(0, 0).into();
        let w = (so3::log(&(rp * r0t)) - so3::log(&(rm * r0t))) / (2.0 * step);
        for k in 0..3 {
            h[(3 + k, j)] = w[k];
        }
    }
    Ok(h)
}

/// Copy of `table` with one flattened parameter shifted by `delta`.
pub fn perturbed(table: &DhTable, index: usize, delta: f64) -> DhTable {
    let mut t = table.clone();
    t.set_param(index, table.param(index) + delta);
    t
}
