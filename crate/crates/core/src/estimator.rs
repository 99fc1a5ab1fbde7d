//! Extended Kalman filter over the flattened DH parameter vector.
//!
//! The state is static (`x_{k+1} = x_k + w_k`), so prediction only inflates
//! the covariance. Updates linearise the marker observation around the
//! current estimate.

use nalgebra::{DMatrix, DVector, Matrix4, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::dh::{self, DhTable, JointConfig, ObsVector};
use crate::error::{Error, Result};

/// Something the filter can linearise: predicted observation, residual chart,
/// and Jacobian at a parameter vector.
pub trait ObservationModel {
    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// `z ⊖ predicted`. Plain subtraction unless the observation lives on a manifold.
    fn residual(&self, z: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        z - predicted
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// Marker pose observed at joint angles `theta`, through `tool` (hand → marker).
pub struct MarkerModel<'a> {
    pub template: &'a DhTable,
    pub theta: &'a JointConfig,
    pub tool: &'a Matrix4<f64>,
}

impl MarkerModel<'_> {
    fn table(&self, x: &DVector<f64>) -> Result<DhTable> {
        self.template.with_params(x)
    }
}

fn obs_from(v: &DVector<f64>) -> ObsVector {
    ObsVector(Vector6::from_column_slice(v.as_slice()))
}

impl ObservationModel for MarkerModel<'_> {
    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let pose = dh::forward_kinematics(&self.table(x)?, self.theta)?.compose(self.tool);
        Ok(DVector::from_column_slice(dh::pose_to_obs(&pose).0.as_slice()))
    }

    fn residual(&self, z: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        let r = obs_from(z).residual(&obs_from(predicted));
        DVector::from_column_slice(r.as_slice())
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        dh::observation_jacobian_with_tool(&self.table(x)?, self.theta, self.tool, dh::JACOBIAN_STEP)
    }
}

/// A marker observation ready for the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub z: ObsVector,
    /// Measurement noise covariance.
    pub r: Matrix6<f64>,
    pub theta: JointConfig,
    /// Hand-to-marker transform of the marker that produced `z`.
    pub tool: Matrix4<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorParams {
    /// Diagonal process-noise variance (m² or rad² per parameter).
    pub process_noise: f64,
    /// Width of the uniform initial distribution of link lengths/offsets (m).
    pub init_width_linear: f64,
    /// Width of the uniform initial distribution of twists/angle offsets (deg).
    pub init_width_angular_deg: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            process_noise: 3e-5,
            init_width_linear: 0.046,
            init_width_angular_deg: 54.0,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("process_noise", self.process_noise),
            ("init_width_linear", self.init_width_linear),
            ("init_width_angular_deg", self.init_width_angular_deg),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl EkfState {
    pub fn new(x_hat: DVector<f64>, p: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self> {
        let n = x_hat.len();
        for m in [&p, &q] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.nrows(),
                });
            }
        }
        Ok(Self { x_hat, p, q })
    }

    /// Prior matching the uniform initialisation: variance `w²/12` per parameter.
    pub fn from_prior(x_hat: DVector<f64>, params: &EstimatorParams) -> Self {
        let n = x_hat.len();
        let lin = params.init_width_linear.powi(2) / 12.0;
        let ang = params.init_width_angular_deg.to_radians().powi(2) / 12.0;
        let p = DMatrix::from_fn(n, n, |i, j| match (i == j, dh::is_angular(i)) {
            (false, _) => 0.0,
            (true, true) => ang,
            (true, false) => lin,
        });
        let q = DMatrix::identity(n, n) * params.process_noise;
        Self { x_hat, p, q }
    }

    pub fn dim(&self) -> usize {
        self.x_hat.len()
    }

    pub fn trace(&self) -> f64 {
        self.p.trace()
    }

    /// `P ← P + Q`; the estimate is unchanged.
    pub fn predict(&self) -> EkfState {
        EkfState {
            x_hat: self.x_hat.clone(),
            p: &self.p + &self.q,
            q: self.q.clone(),
        }
    }

    /// Standard EKF correction against a generic observation model.
    ///
    /// On a non-invertible innovation covariance the caller keeps the prior.
    pub fn update_with<M: ObservationModel>(&self, model: &M, z: &DVector<f64>, r: &DMatrix<f64>) -> Result<EkfState> {
        let h = model.jacobian(&self.x_hat)?;
        if h.nrows() != z.len() || r.nrows() != z.len() || r.ncols() != z.len() || h.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: z.len(),
                found: h.nrows(),
            });
        }
        let predicted = model.predict(&self.x_hat)?;
        let innovation = model.residual(z, &predicted);

        let ph_t = &self.p * h.transpose();
        let s = &h * &ph_t + r;
        let s = (&s + s.transpose()) * 0.5;
        let chol = s.clone().cholesky().ok_or(Error::SingularInnovation)?;
        // K = P Hᵀ S⁻¹  ⇔  S Kᵀ = H P
        let k = chol.solve(&ph_t.transpose()).transpose();
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularInnovation);
        }
        let x_hat = &self.x_hat + &k * innovation;
        let p = &self.p - &k * s * k.transpose();
        let p = (&p + p.transpose()) * 0.5;
        Ok(EkfState {
            x_hat,
            p,
            q: self.q.clone(),
        })
    }

    /// Correction with a marker measurement; `template` supplies the chain
    /// layout and base transform the estimate is poured into.
    pub fn update(&self, meas: &Measurement, template: &DhTable) -> Result<EkfState> {
        let model = MarkerModel {
            template,
            theta: &meas.theta,
            tool: &meas.tool,
        };
        let z = DVector::from_column_slice(meas.z.0.as_slice());
        let r = DMatrix::from_column_slice(6, 6, meas.r.as_slice());
        self.update_with(&model, &z, &r)
    }

    /// `tr(P)` after a predict + update at Jacobian `h` with noise `r`,
    /// without touching the estimate.
    pub fn posterior_trace_for(&self, h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
        let prior = &self.p + &self.q;
        let a = h * &prior; // H P
        let s = &a * h.transpose() + r;
        let s = (&s + s.transpose()) * 0.5;
        let chol = s.cholesky().ok_or(Error::SingularInnovation)?;
        // tr(P Hᵀ S⁻¹ H P) = ‖L⁻¹ H P‖²_F
        let w = chol.l().solve_lower_triangular(&a).ok_or(Error::SingularInnovation)?;
        let reduction = w.norm_squared();
        if !reduction.is_finite() {
            return Err(Error::SingularInnovation);
        }
        Ok(prior.trace() - reduction)
    }

    /// Expected posterior trace if a marker were observed at `theta` with noise `r_pred`.
    pub fn hypothetical_posterior_trace(
        &self,
        template: &DhTable,
        theta: &JointConfig,
        tool: &Matrix4<f64>,
        r_pred: &Matrix6<f64>,
    ) -> Result<f64> {
        let table = template.with_params(&self.x_hat)?;
        let h = dh::observation_jacobian_with_tool(&table, theta, tool, dh::JACOBIAN_STEP)?;
        self.posterior_trace_for(&h, &DMatrix::from_column_slice(6, 6, r_pred.as_slice()))
    }

    /// `‖P − Pᵀ‖` (Frobenius).
    pub fn asymmetry(&self) -> f64 {
        (&self.p - self.p.transpose()).norm()
    }

    /// Smallest eigenvalue of the symmetric part of `P`.
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.p + self.p.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}
