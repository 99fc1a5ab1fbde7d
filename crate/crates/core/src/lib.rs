//! Online calibration of an arm's Denavit-Hartenberg parameters from noisy,
//! occludable marker observations, with cost-sensitive active selection of
//! the joint configurations to sample.
//!
//! The pipeline is: [`simworld`] produces marker observations of a ground-truth
//! arm, [`estimator`] refines a DH estimate with an extended Kalman filter,
//! [`selection`] picks the next configuration by minimising an A-optimality
//! cost with [`direct`], and [`harness`] runs and aggregates whole experiments.

pub mod direct;
pub mod dh;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod metrics;
pub mod noise;
pub mod occlusion;
pub mod selection;
pub mod simworld;
pub mod so3;

pub use error::{Error, Result};
