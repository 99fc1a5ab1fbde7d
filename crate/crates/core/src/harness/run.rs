//! Seeded calibration runs and their aggregation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::Experiment;
use super::seeds;
use crate::dh::JointConfig;
use crate::error::{Error, Result};
use crate::estimator::EkfState;
use crate::metrics::{self, EvalSet};
use crate::noise::NoiseMode;
use crate::occlusion::OcclusionMemory;
use crate::selection::{self, CostContext, Method};
use crate::simworld::{self, Observation};

/// One calibration iteration (one sampling attempt).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    /// 1-based.
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub theta_norm: Vec<f64>,
    pub cost: f64,
    pub objective: f64,
    /// Optimizer evaluations spent on this selection.
    pub evals: usize,
    /// l1 step from the previous configuration in normalized coordinates.
    pub step_l1: f64,
    pub detected: bool,
    pub marker: Option<usize>,
    /// Per-axis variance handed to the estimator.
    pub obs_var: Option<f64>,
    /// The estimator rejected the measurement (singular innovation).
    pub update_skipped: bool,
    pub x_hat: Vec<f64>,
    pub p_diag: Vec<f64>,
    pub pos_err_mm: f64,
    pub rot_err_deg: f64,
    pub cum_move_deg: f64,
    pub discarded_so_far: usize,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub method: Method,
    pub mode: NoiseMode,
    pub repetition: usize,
    pub init_seed: u64,
    pub run_seed: u64,
    pub initial_theta: Vec<f64>,
    pub initial_norm: Vec<f64>,
    /// Errors of the initial estimate on the first evaluation set.
    pub initial_pos_err_mm: f64,
    pub initial_rot_err_deg: f64,
    pub rows: Vec<IterationRow>,
    pub memory: OcclusionMemory,
}

impl RunRecord {
    pub fn final_row(&self) -> Option<&IterationRow> {
        self.rows.last()
    }

    pub fn discarded(&self) -> usize {
        self.rows.last().map_or(0, |r| r.discarded_so_far)
    }
}

fn eval_set(exp: &Experiment, rep: usize, iteration: usize) -> EvalSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::eval_seed(exp.config.experiment.master_seed, rep, iteration));
    EvalSet::generate(&exp.world.limits, exp.config.experiment.eval_configs, &mut rng)
}

/// Runs one method for one repetition.
///
/// The initial estimate, the starting configuration and every evaluation set
/// depend only on the master seed and `rep`, so all methods start from the
/// same place. Selection randomness and sensor noise come from a
/// method-specific seed.
pub fn run_single(exp: &Experiment, method: Method, rep: usize) -> Result<RunRecord> {
    let cfg = &exp.config;
    let world = &exp.world;
    let master = cfg.experiment.master_seed;
    let mode = cfg.experiment.noise_mode;
    let n = world.joint_count();

    let init_seed = seeds::init_seed(master, rep);
    let run_seed = seeds::run_seed(master, method, rep);
    let mut init_rng = ChaCha8Rng::seed_from_u64(init_seed);
    let initial = simworld::perturb_initial_estimate(&world.true_table, exp.init_widths(), &mut init_rng);
    let start_norm: Vec<f64> = (0..n).map(|_| init_rng.random::<f64>()).collect();
    let start = world.limits.denormalize(&start_norm)?;

    let mut select_rng = ChaCha8Rng::seed_from_u64(run_seed);
    select_rng.set_stream(1);
    let mut obs_rng = ChaCha8Rng::seed_from_u64(run_seed);
    obs_rng.set_stream(2);

    let template = &world.true_table;
    let mut ekf = EkfState::from_prior(initial.to_params(), &cfg.estimator);
    let mut memory = OcclusionMemory::new(cfg.occlusion)?;

    let first = eval_set(exp, rep, 1);
    let (initial_pos, initial_rot) = metrics::avg_errors(&initial, &world.true_table, &first)?;

    let mut prev: JointConfig = start.clone();
    let mut prev_norm = start_norm.clone();
    let mut cum_move = 0.0;
    let mut discarded = 0;
    let target = cfg.experiment.iterations;
    let max_attempts = if cfg.experiment.count_discarded { target } else { 10 * target };
    let mut rows = Vec::with_capacity(target);
    let mut detections = 0;

    for k in 1..=max_attempts {
        if !cfg.experiment.count_discarded && detections == target {
            break;
        }
        let sel = {
            let ctx = CostContext {
                ekf: &ekf,
                template,
                limits: &world.limits,
                markers: &world.markers,
                camera: &world.camera,
                noise: &world.noise,
                mode,
                memory: &memory,
                params: &exp.cost,
            };
            selection::select_next(method, &prev_norm, &ctx, &exp.direct, &mut select_rng)?
        };
        cum_move += metrics::step_deg(&prev, &sel.theta);
        let step_l1 = selection::l1_distance(&prev_norm, &sel.theta_norm);

        let obs = world.sample_observation(&sel.theta, mode, &mut obs_rng)?;
        let mut update_skipped = false;
        let mut obs_var = None;
        let marker = match obs {
            Observation::Detected { measurement, marker } => {
                obs_var = Some(measurement.r[(0, 0)]);
                detections += 1;
                memory.record_attempt(&sel.theta_norm, true)?;
                match ekf.predict().update(&measurement, template) {
                    Ok(next) => ekf = next,
                    Err(Error::SingularInnovation) => update_skipped = true,
                    Err(e) => return Err(e),
                }
                Some(marker)
            }
            Observation::NoDetection => {
                memory.record_attempt(&sel.theta_norm, false)?;
                discarded += 1;
                None
            }
        };

        let estimate = template.with_params(&ekf.x_hat)?;
        let evals = if k == 1 { first.clone() } else { eval_set(exp, rep, k) };
        let (pos, rot) = metrics::avg_errors(&estimate, &world.true_table, &evals)?;
        rows.push(IterationRow {
            iteration: k,
            theta: sel.theta.angles().to_vec(),
            theta_norm: sel.theta_norm.clone(),
            cost: sel.cost,
            objective: sel.objective,
            evals: sel.evals,
            step_l1,
            detected: marker.is_some(),
            marker,
            obs_var,
            update_skipped,
            x_hat: ekf.x_hat.iter().copied().collect(),
            p_diag: ekf.p.diagonal().iter().copied().collect(),
            pos_err_mm: pos,
            rot_err_deg: rot,
            cum_move_deg: cum_move,
            discarded_so_far: discarded,
        });
        prev = sel.theta;
        prev_norm = sel.theta_norm;
    }

    Ok(RunRecord {
        method,
        mode,
        repetition: rep,
        init_seed,
        run_seed,
        initial_theta: start.angles().to_vec(),
        initial_norm: start_norm,
        initial_pos_err_mm: initial_pos,
        initial_rot_err_deg: initial_rot,
        rows,
        memory,
    })
}

/// Mean and population standard deviation across repetitions at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub pos_err_mean: f64,
    pub pos_err_std: f64,
    pub rot_err_mean: f64,
    pub rot_err_std: f64,
    pub cum_move_mean: f64,
    pub cum_move_std: f64,
    pub discarded_mean: f64,
}

#[derive(Debug, Clone)]
pub struct MethodAggregate {
    pub method: Method,
    pub label: String,
    pub runs: Vec<RunRecord>,
    /// Repetitions that aborted, with the error message.
    pub failures: Vec<(usize, String)>,
    pub per_iteration: Vec<IterationStats>,
    pub discarded_mean: f64,
    pub discarded_std: f64,
}

impl MethodAggregate {
    pub fn final_stats(&self) -> Option<&IterationStats> {
        self.per_iteration.last()
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub mode: NoiseMode,
    pub methods: Vec<MethodAggregate>,
}

impl SuiteResult {
    pub fn get(&self, method: Method) -> Option<&MethodAggregate> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Per-iteration statistics across runs, up to the length of the shortest run.
pub fn aggregate(runs: &[RunRecord]) -> Vec<IterationStats> {
    let iters = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    (0..iters)
        .map(|k| {
            let col = |f: fn(&IterationRow) -> f64| -> (f64, f64) {
                let v: Vec<f64> = runs.iter().map(|r| f(&r.rows[k])).collect();
                metrics::mean_std(&v)
            };
            let (pm, ps) = col(|r| r.pos_err_mm);
            let (rm, rs) = col(|r| r.rot_err_deg);
            let (mm, ms) = col(|r| r.cum_move_deg);
            let (dm, _) = col(|r| r.discarded_so_far as f64);
            IterationStats {
                iteration: k + 1,
                pos_err_mean: pm,
                pos_err_std: ps,
                rot_err_mean: rm,
                rot_err_std: rs,
                cum_move_mean: mm,
                cum_move_std: ms,
                discarded_mean: dm,
            }
        })
        .collect()
}

/// Runs every configured method for every repetition.
///
/// Repetitions run in parallel; results are identical to a sequential run.
/// A repetition that fails is reported in [`MethodAggregate::failures`] and
/// left out of the statistics.
pub fn run_suite(exp: &Experiment) -> SuiteResult {
    let reps = exp.config.experiment.repetitions;
    let methods = exp
        .config
        .experiment
        .methods
        .iter()
        .map(|&method| {
            let outcomes: Vec<Result<RunRecord>> =
                (0..reps).into_par_iter().map(|rep| run_single(exp, method, rep)).collect();
            let mut runs = Vec::with_capacity(reps);
            let mut failures = Vec::new();
            for (rep, o) in outcomes.into_iter().enumerate() {
                match o {
                    Ok(r) => runs.push(r),
                    Err(e) => failures.push((rep, e.to_string())),
                }
            }
            let per_iteration = aggregate(&runs);
            let discards: Vec<f64> = runs.iter().map(|r| r.discarded() as f64).collect();
            let (discarded_mean, discarded_std) = metrics::mean_std(&discards);
            MethodAggregate {
                method,
                label: exp.label(method),
                runs,
                failures,
                per_iteration,
                discarded_mean,
                discarded_std,
            }
        })
        .collect();
    SuiteResult {
        mode: exp.config.experiment.noise_mode,
        methods,
    }
}
