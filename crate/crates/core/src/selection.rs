//! Joint-configuration selection: random sampling, plain active learning on
//! the modified A-optimality cost, and the two movement-aware variants.
//!
//! All optimisation happens in normalized joint coordinates `[0,1]ⁿ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix4;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dh::{self, DhTable, JointConfig, JointLimits, Pose};
use crate::direct::{self, DirectConfig, SearchBox, LARGE_VALUE};
use crate::error::{Error, Result};
use crate::estimator::EkfState;
use crate::noise::{self, CameraModel, NoiseMode, NoiseParams};
use crate::occlusion::OcclusionMemory;
use crate::simworld::MarkerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Amplitude of the `arctan` penalty on forward (positive x) hand positions.
    pub penalty_a: f64,
    /// Steepness of that penalty (1/m).
    pub penalty_b: f64,
    /// Weight of the l1 movement penalty.
    pub gamma: f64,
    /// Half-width of the movement box, in normalized joint units.
    pub delta: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            penalty_a: 1e-3,
            penalty_b: 10.0,
            gamma: 3e-4,
            delta: 0.5,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty_a > 0.0 && self.penalty_a.is_finite()) {
            return Err(Error::InvalidParameter(format!("penalty_a = {} must be > 0", self.penalty_a)));
        }
        if !(self.penalty_b > 0.0 && self.penalty_b.is_finite()) {
            return Err(Error::InvalidParameter(format!("penalty_b = {} must be > 0", self.penalty_b)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma = {} must be >= 0", self.gamma)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {} must be in (0, 1]", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "r", alias = "random")]
    Random,
    #[serde(rename = "al")]
    Al,
    #[serde(rename = "ucsal")]
    Ucsal,
    #[serde(rename = "ccsal")]
    Ccsal,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Random, Method::Al, Method::Ucsal, Method::Ccsal];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Random => "R",
            Method::Al => "AL",
            Method::Ucsal => "UCSAL",
            Method::Ccsal => "CCSAL",
        }
    }

    /// Short name used on the command line and in config files.
    pub fn key(&self) -> &'static str {
        match self {
            Method::Random => "r",
            Method::Al => "al",
            Method::Ucsal => "ucsal",
            Method::Ccsal => "ccsal",
        }
    }

    pub fn is_active(&self) -> bool {
        !matches!(self, Method::Random)
    }

    /// Parses a comma-separated list such as `r,al,ucsal`.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let m: Method = tok.parse()?;
            if out.contains(&m) {
                return Err(Error::Config(format!("method {tok:?} listed twice")));
            }
            out.push(m);
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "r" | "random" => Ok(Method::Random),
            "al" => Ok(Method::Al),
            "ucsal" => Ok(Method::Ucsal),
            "ccsal" => Ok(Method::Ccsal),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected r, al, ucsal or ccsal)"
            ))),
        }
    }
}

/// Everything the cost function reads. Borrowed for one selection step.
pub struct CostContext<'a> {
    pub ekf: &'a EkfState,
    /// Chain layout and base transform; rows are replaced by the estimate.
    pub template: &'a DhTable,
    pub limits: &'a JointLimits,
    pub markers: &'a [MarkerSpec],
    pub camera: &'a CameraModel,
    pub noise: &'a NoiseParams,
    pub mode: NoiseMode,
    pub memory: &'a OcclusionMemory,
    pub params: &'a CostParams,
}

/// Marker the detector would most likely report, its predicted pose, and the
/// variance the estimator assumes for it.
fn predicted_marker(ctx: &CostContext<'_>, hand: &Pose) -> Result<(Matrix4<f64>, f64)> {
    let mut best: Option<(Matrix4<f64>, f64, f64)> = None;
    for m in ctx.markers {
        let pose = hand.compose(&m.offset);
        let (r, phi) = noise::camera_geometry(ctx.camera, &pose)?;
        let s2 = noise::predict_variance(r, phi, ctx.noise);
        if best.as_ref().is_none_or(|b| s2 < b.1) {
            best = Some((m.offset, s2, ctx.noise.assumed_variance(ctx.mode, r, phi)));
        }
    }
    let (tool, _, assumed) = best.ok_or_else(|| Error::InvalidParameter("no markers".into()))?;
    Ok((tool, assumed))
}

impl CostContext<'_> {
    /// Expected trace of the posterior covariance after sampling at `theta`.
    /// Estimator failures map to [`LARGE_VALUE`].
    pub fn base_cost(&self, theta: &JointConfig) -> f64 {
        self.costs(theta, &theta.normalize()).map_or(LARGE_VALUE, |c| c.0)
    }

    /// `C₀/η̄ + a·arctan(b·p̂ₓ)`.
    pub fn full_cost(&self, theta: &JointConfig) -> f64 {
        self.costs(theta, &theta.normalize()).map_or(LARGE_VALUE, |c| c.1)
    }

    fn full_cost_unit(&self, u: &[f64]) -> f64 {
        self.limits
            .denormalize(u)
            .and_then(|theta| self.costs(&theta, u))
            .map_or(LARGE_VALUE, |c| c.1)
    }

    /// `(C₀, C)` at `theta`, whose normalized coordinates are `u`.
    fn costs(&self, theta: &JointConfig, u: &[f64]) -> Result<(f64, f64)> {
        let table = self.template.with_params(&self.ekf.x_hat)?;
        let hand = dh::forward_kinematics(&table, theta)?;
        let base = predicted_marker(self, &hand)
            .and_then(|(tool, s2)| {
                let h = dh::observation_jacobian_with_tool(&table, theta, &tool, dh::JACOBIAN_STEP)?;
                let r = nalgebra::DMatrix::from_column_slice(6, 6, noise::to_cov(s2).as_slice());
                self.ekf.posterior_trace_for(&h, &r)
            })
            .ok()
            .filter(|t| t.is_finite())
            .unwrap_or(LARGE_VALUE);
        let eta = self.memory.success_mean(u);
        let penalty = self.params.penalty_a * (self.params.penalty_b * hand.position.x).atan();
        Ok((base, base / eta + penalty))
    }
}

/// l1 distance in normalized joint coordinates.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub theta: JointConfig,
    pub theta_norm: Vec<f64>,
    /// `full_cost` at the selected point.
    pub cost: f64,
    /// Value the optimizer minimised (includes the movement penalty for UCSAL).
    pub objective: f64,
    pub evals: usize,
}

/// Picks the next configuration. `prev_norm` is the current configuration in
/// normalized coordinates; `rng` is only used by [`Method::Random`].
pub fn select_next<R: Rng + ?Sized>(
    method: Method,
    prev_norm: &[f64],
    ctx: &CostContext<'_>,
    optimizer: &DirectConfig,
    rng: &mut R,
) -> Result<Selection> {
    let n = ctx.limits.len();
    if prev_norm.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: prev_norm.len(),
        });
    }
    ctx.params.validate()?;

    let (u, objective, evals) = match method {
        Method::Random => {
            let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            (u, f64::NAN, 0)
        }
        Method::Al => {
            let r = direct::minimize(|u| ctx.full_cost_unit(u), &SearchBox::unit(n), optimizer)?;
            (r.x_best, r.f_best, r.evals_used)
        }
        Method::Ucsal => {
            let gamma = ctx.params.gamma;
            let r = direct::minimize(
                |u| ctx.full_cost_unit(u) + gamma * l1_distance(u, prev_norm),
                &SearchBox::unit(n),
                optimizer,
            )?;
            (r.x_best, r.f_best, r.evals_used)
        }
        Method::Ccsal => {
            let bx = movement_box(prev_norm, ctx.params.delta)?;
            let r = direct::minimize(|u| ctx.full_cost_unit(u), &bx, optimizer)?;
            (r.x_best, r.f_best, r.evals_used)
        }
    };

    let theta = ctx.limits.denormalize(&u)?;
    let cost = ctx.full_cost_unit(&u);
    Ok(Selection {
        theta,
        objective: if method == Method::Random { cost } else { objective },
        theta_norm: u,
        cost,
        evals,
    })
}

/// `[prev − δ, prev + δ] ∩ [0, 1]ⁿ`.
pub fn movement_box(prev_norm: &[f64], delta: f64) -> Result<SearchBox> {
    let lower = prev_norm.iter().map(|p| (p - delta).max(0.0)).collect();
    let upper = prev_norm.iter().map(|p| (p + delta).min(1.0)).collect();
    SearchBox::new(lower, upper)
}
