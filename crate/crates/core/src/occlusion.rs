//! Kernel-smoothed Beta-Binomial predictor of marker visibility, learned from
//! past sampling attempts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Componentwise tolerance under which two attempts count as the same configuration.
pub const SAME_CONFIG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptRecord {
    /// Configuration in normalized `[0,1]ⁿ` joint coordinates.
    pub theta_norm: Vec<f64>,
    pub successes: u32,
    pub failures: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcclusionParams {
    pub prior_a0: f64,
    pub prior_b0: f64,
    pub length_scale: f64,
}

impl Default for OcclusionParams {
    fn default() -> Self {
        Self {
            prior_a0: 4.0,
            prior_b0: 1.0,
            length_scale: 0.15,
        }
    }
}

impl OcclusionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("prior_a0", self.prior_a0),
            ("prior_b0", self.prior_b0),
            ("length_scale", self.length_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionMemory {
    records: Vec<AttemptRecord>,
    params: OcclusionParams,
}

/// Squared-exponential weight `exp(−‖a − b‖² / 2ℓ²)`.
pub fn kernel(theta_star: &[f64], theta_k: &[f64], length_scale: f64) -> f64 {
    debug_assert_eq!(theta_star.len(), theta_k.len());
    let d2: f64 = theta_star.iter().zip(theta_k).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * length_scale * length_scale)).exp()
}

impl OcclusionMemory {
    pub fn new(params: OcclusionParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            records: Vec::new(),
            params,
        })
    }

    pub fn params(&self) -> &OcclusionParams {
        &self.params
    }

    pub fn records(&self) -> &[AttemptRecord] {
        &self.records
    }

    pub fn discarded(&self) -> u32 {
        self.records.iter().map(|r| r.failures).sum()
    }

    /// Beta parameters `(α, β)` at `theta_star`.
    pub fn posterior(&self, theta_star: &[f64]) -> (f64, f64) {
        let (mut s, mut u) = (0.0, 0.0);
        for rec in &self.records {
            let w = kernel(theta_star, &rec.theta_norm, self.params.length_scale);
            s += w * rec.successes as f64;
            u += w * rec.failures as f64;
        }
        (s + self.params.prior_a0, u + self.params.prior_b0)
    }

    /// Predicted probability that a marker is detected at `theta_star`.
    pub fn success_mean(&self, theta_star: &[f64]) -> f64 {
        let (a, b) = self.posterior(theta_star);
        a / (a + b)
    }

    /// Adds one attempt, merging it into an existing record at the same configuration.
    pub fn record_attempt(&mut self, theta_norm: &[f64], success: bool) -> Result<()> {
        if theta_norm.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(Error::InvalidParameter("attempt configuration outside [0,1]".into()));
        }
        if let Some(first) = self.records.first() {
            if first.theta_norm.len() != theta_norm.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.theta_norm.len(),
                    found: theta_norm.len(),
                });
            }
        }
        let existing = self.records.iter_mut().find(|r| {
            r.theta_norm
                .iter()
                .zip(theta_norm)
                .all(|(a, b)| (a - b).abs() <= SAME_CONFIG_TOL)
        });
        let rec = match existing {
            Some(r) => r,
            None => {
                self.records.push(AttemptRecord {
                    theta_norm: theta_norm.to_vec(),
                    successes: 0,
                    failures: 0,
                });
                self.records.last_mut().unwrap()
            }
        };
        if success {
            rec.successes += 1;
        } else {
            rec.failures += 1;
        }
        Ok(())
    }
}
