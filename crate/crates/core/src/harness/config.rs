//! TOML experiment configuration.
//!
//! Every section is optional and falls back to the built-in example world and
//! the default protocol. Unknown keys are rejected. A manifest written by
//! [`super::emit_outputs`] is the same format plus a `[manifest]` section that
//! records the derived seeds; loading it checks those seeds.

use std::path::Path;

use nalgebra::{Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use super::seeds;
use crate::dh::{DhTable, JointLimits};
use crate::direct::DirectConfig;
use crate::error::{Error, Result};
use crate::estimator::EstimatorParams;
use crate::noise::{CameraModel, NoiseMode, NoiseParams};
use crate::occlusion::OcclusionParams;
use crate::selection::{CostParams, Method};
use crate::simworld::{GroundTruth, InitWidths, MarkerSpec, VisibilityRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub iterations: usize,
    /// When false, attempts without a detection do not count towards
    /// `iterations`; the loop then stops after `iterations` detections or
    /// `10 * iterations` attempts, whichever comes first.
    pub count_discarded: bool,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    pub noise_mode: NoiseMode,
    pub master_seed: u64,
    /// Size of the evaluation set drawn after every iteration.
    pub eval_configs: usize,
    pub output_dir: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            iterations: 50,
            count_discarded: true,
            repetitions: 50,
            methods: Method::ALL.to_vec(),
            noise_mode: NoiseMode::PoseDependent,
            master_seed: 1,
            eval_configs: 1000,
            output_dir: "results".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub penalty_a: f64,
    pub penalty_b: f64,
    pub gamma: f64,
    pub delta: f64,
    /// DIRECT evaluation budget per selection.
    pub budget: usize,
    pub epsilon: f64,
}

impl Default for SelectionSection {
    fn default() -> Self {
        let c = CostParams::default();
        let d = DirectConfig::default();
        Self {
            penalty_a: c.penalty_a,
            penalty_b: c.penalty_b,
            gamma: c.gamma,
            delta: c.delta,
            budget: d.max_evals,
            epsilon: d.epsilon,
        }
    }
}

impl SelectionSection {
    pub fn cost_params(&self) -> CostParams {
        CostParams {
            penalty_a: self.penalty_a,
            penalty_b: self.penalty_b,
            gamma: self.gamma,
            delta: self.delta,
        }
    }

    pub fn direct_config(&self) -> DirectConfig {
        DirectConfig {
            max_evals: self.budget,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerConfig {
    pub name: String,
    /// Row-major hand → marker transform.
    pub transform: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    /// True DH rows, one `a d alpha theta_off` line per joint (m, rad).
    pub dh_table: String,
    /// Row-major world → first-joint transform.
    pub base_transform: [[f64; 4]; 4],
    pub joint_limits_deg: Vec<[f64; 2]>,
    pub camera_position: [f64; 3],
    pub camera_axis: [f64; 3],
    pub fov_half_angle_deg: f64,
    pub max_view_angle_deg: f64,
    pub require_frontal_workspace: bool,
    pub markers: Vec<MarkerConfig>,
}

fn rows_of(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn matrix_of(rows: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| rows[i][j])
}

impl Default for WorldConfig {
    fn default() -> Self {
        let w = GroundTruth::default();
        Self::from_world(&w)
    }
}

impl WorldConfig {
    pub fn from_world(w: &GroundTruth) -> Self {
        Self {
            dh_table: w.true_table.to_text(),
            base_transform: rows_of(&w.true_table.base),
            joint_limits_deg: w
                .limits
                .bounds()
                .iter()
                .map(|&(lo, hi)| [lo.to_degrees(), hi.to_degrees()])
                .collect(),
            camera_position: w.camera.position.into(),
            camera_axis: w.camera.optical_axis().into(),
            fov_half_angle_deg: w.camera.fov_half_angle,
            max_view_angle_deg: w.visibility.max_view_angle,
            require_frontal_workspace: w.visibility.require_frontal_workspace,
            markers: w
                .markers
                .iter()
                .map(|m| MarkerConfig {
                    name: m.name.clone(),
                    transform: rows_of(&m.offset),
                })
                .collect(),
        }
    }

    pub fn build(&self, noise: NoiseParams) -> Result<GroundTruth> {
        let rows = DhTable::from_text(&self.dh_table)?.rows;
        let true_table = DhTable::new(rows, matrix_of(&self.base_transform))?;
        let limits = JointLimits::new(
            self.joint_limits_deg
                .iter()
                .map(|[lo, hi]| (lo.to_radians(), hi.to_radians()))
                .collect(),
        )?;
        let camera = CameraModel::new(
            Vector3::from(self.camera_position),
            Vector3::from(self.camera_axis),
            self.fov_half_angle_deg,
        )?;
        let markers = self
            .markers
            .iter()
            .map(|m| MarkerSpec::new(m.name.clone(), matrix_of(&m.transform)))
            .collect::<Result<Vec<_>>>()?;
        let world = GroundTruth {
            true_table,
            limits,
            markers,
            camera,
            noise,
            visibility: VisibilityRule {
                max_view_angle: self.max_view_angle_deg,
                require_frontal_workspace: self.require_frontal_workspace,
            },
        };
        world.validate()?;
        Ok(world)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedEntry {
    pub method: Method,
    pub repetition: usize,
    pub init_seed: String,
    pub run_seed: String,
}

/// Crate version and resolved seeds written next to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSection {
    pub crate_version: String,
    pub seeds: Vec<SeedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub selection: SelectionSection,
    pub estimator: EstimatorParams,
    pub noise: NoiseParams,
    pub occlusion: OcclusionParams,
    pub world: WorldConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestSection>,
}

/// A validated configuration with the world assembled.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub world: GroundTruth,
    pub cost: CostParams,
    pub direct: DirectConfig,
}

fn hex(seed: u64) -> String {
    format!("{seed:#018x}")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_manifest()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The derived seeds for every (method, repetition) pair.
    pub fn resolved_seeds(&self) -> Vec<SeedEntry> {
        let e = &self.experiment;
        e.methods
            .iter()
            .flat_map(|&m| {
                (0..e.repetitions).map(move |rep| SeedEntry {
                    method: m,
                    repetition: rep,
                    init_seed: hex(seeds::init_seed(e.master_seed, rep)),
                    run_seed: hex(seeds::run_seed(e.master_seed, m, rep)),
                })
            })
            .collect()
    }

    /// Copy of this config with the `[manifest]` section filled in.
    pub fn to_manifest(&self) -> Self {
        let mut m = self.clone();
        m.manifest = Some(ManifestSection {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            seeds: self.resolved_seeds(),
        });
        m
    }

    fn check_manifest(&self) -> Result<()> {
        if let Some(m) = &self.manifest {
            if m.seeds != self.resolved_seeds() {
                return Err(Error::Config(
                    "manifest seeds do not match the seeds derived from this configuration".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if e.repetitions < 1 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if e.eval_configs < 1 {
            return Err(Error::Config("eval_configs must be >= 1".into()));
        }
        if e.master_seed > i64::MAX as u64 {
            return Err(Error::Config("master_seed must fit in a signed 64-bit integer".into()));
        }
        for (i, m) in e.methods.iter().enumerate() {
            if e.methods[..i].contains(m) {
                return Err(Error::Config(format!("method {} listed twice", m.key())));
            }
        }
        self.selection.cost_params().validate()?;
        self.selection.direct_config().validate()?;
        self.estimator.validate()?;
        self.noise.validate()?;
        self.occlusion.validate()?;
        Ok(())
    }

    pub fn build(&self) -> Result<Experiment> {
        self.validate()?;
        let world = self.world.build(self.noise)?;
        Ok(Experiment {
            config: self.clone(),
            world,
            cost: self.selection.cost_params(),
            direct: self.selection.direct_config(),
        })
    }
}

impl Experiment {
    pub fn init_widths(&self) -> InitWidths {
        InitWidths {
            linear: self.config.estimator.init_width_linear,
            angular: self.config.estimator.init_width_angular_deg.to_radians(),
        }
    }

    /// Label of a method's runs, e.g. `AL` or `AL-CN`.
    pub fn label(&self, method: Method) -> String {
        match self.config.experiment.noise_mode {
            NoiseMode::PoseDependent => method.label().to_string(),
            NoiseMode::Constant => format!("{}-CN", method.label()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        let exp = back.build().unwrap();
        let def = GroundTruth::default();
        assert_eq!(exp.world.true_table, def.true_table);
        assert_eq!(exp.world.limits, def.limits);
        assert_eq!(exp.world.markers, def.markers);
        assert_eq!(exp.world.visibility, def.visibility);
        assert_eq!(exp.world.camera.position, def.camera.position);
        assert!((exp.world.camera.optical_axis() - def.camera.optical_axis()).norm() < 1e-15);
    }

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[experiment]\nfoo = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[experiment]\nmethods = [\"xx\"]\n").is_err());
        let cfg = ExperimentConfig::from_toml_str("[experiment]\niterations = 0\n").unwrap();
        assert!(cfg.build().is_err());
        let cfg = ExperimentConfig::from_toml_str("[selection]\ndelta = 0.0\n").unwrap();
        assert!(cfg.build().is_err());
        let cfg = ExperimentConfig::from_toml_str("[world]\ndh_table = \"1 2 3\"\n").unwrap();
        assert!(cfg.build().is_err());
        let cfg = ExperimentConfig::from_toml_str("[experiment]\nmethods = [\"al\", \"al\"]\n").unwrap();
        assert!(cfg.build().is_err());
    }

    #[test]
    fn manifest_seeds_are_checked() {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.repetitions = 2;
        let manifest = cfg.to_manifest();
        let text = manifest.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, manifest);
        let tampered = text.replace("master_seed = 1", "master_seed = 2");
        assert!(ExperimentConfig::from_toml_str(&tampered).is_err());
    }

    #[test]
    fn labels_follow_noise_mode() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.build().unwrap().label(Method::Ucsal), "UCSAL");
        cfg.experiment.noise_mode = NoiseMode::Constant;
        assert_eq!(cfg.build().unwrap().label(Method::Al), "AL-CN");
    }
}
