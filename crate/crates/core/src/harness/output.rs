//! CSV and manifest output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::run::{MethodAggregate, SuiteResult};
use crate::error::{Error, Result};
use crate::selection::Method;

pub const METRIC_HEADER: &str = "run_id,method,iteration,pos_err_mm,rot_err_deg,cum_move_deg,discarded_so_far";

const SUMMARY_HEADER: &str = "method,runs,failed_runs,final_pos_err_mean,final_pos_err_std,\
final_rot_err_mean,final_rot_err_std,cum_move_mean,cum_move_std,movement_ratio_vs_al,\
discarded_mean,discarded_std";

/// Final-iteration figures for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub runs: usize,
    pub failed_runs: usize,
    pub pos_err_mean: f64,
    pub pos_err_std: f64,
    pub rot_err_mean: f64,
    pub rot_err_std: f64,
    pub cum_move_mean: f64,
    pub cum_move_std: f64,
    /// Mean accumulated movement relative to AL in the same suite.
    pub movement_ratio_vs_al: Option<f64>,
    pub discarded_mean: f64,
    pub discarded_std: f64,
}

pub fn summary_rows(suite: &SuiteResult) -> Vec<SummaryRow> {
    let al_move = suite
        .get(Method::Al)
        .and_then(|a| a.final_stats())
        .map(|s| s.cum_move_mean);
    suite
        .methods
        .iter()
        .map(|m| {
            let f = m.final_stats();
            let pick = |g: fn(&super::run::IterationStats) -> f64| f.map_or(f64::NAN, g);
            let cum = pick(|s| s.cum_move_mean);
            SummaryRow {
                label: m.label.clone(),
                runs: m.runs.len(),
                failed_runs: m.failures.len(),
                pos_err_mean: pick(|s| s.pos_err_mean),
                pos_err_std: pick(|s| s.pos_err_std),
                rot_err_mean: pick(|s| s.rot_err_mean),
                rot_err_std: pick(|s| s.rot_err_std),
                cum_move_mean: cum,
                cum_move_std: pick(|s| s.cum_move_std),
                movement_ratio_vs_al: al_move.filter(|a| *a > 0.0).map(|a| cum / a),
                discarded_mean: m.discarded_mean,
                discarded_std: m.discarded_std,
            }
        })
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn indexed(prefix: &str, n: usize) -> String {
    (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

fn metrics_csv(m: &MethodAggregate) -> String {
    let mut s = format!("{METRIC_HEADER}\n");
    for run in &m.runs {
        for r in &run.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                run.repetition, m.label, r.iteration, r.pos_err_mm, r.rot_err_deg, r.cum_move_deg, r.discarded_so_far
            );
        }
    }
    s
}

fn aggregate_csv(m: &MethodAggregate) -> String {
    let mut s = String::from(
        "iteration,pos_err_mean,pos_err_std,rot_err_mean,rot_err_std,cum_move_mean,cum_move_std,discarded_mean\n",
    );
    for a in &m.per_iteration {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            a.iteration,
            a.pos_err_mean,
            a.pos_err_std,
            a.rot_err_mean,
            a.rot_err_std,
            a.cum_move_mean,
            a.cum_move_std,
            a.discarded_mean
        );
    }
    s
}

fn selections_csv(m: &MethodAggregate, joints: usize) -> String {
    let mut s = format!(
        "run_id,iteration,detected,marker,obs_var,update_skipped,cost,objective,evals,step_l1,{},{}\n",
        indexed("theta_", joints),
        indexed("theta_norm_", joints)
    );
    for run in &m.runs {
        for r in &run.rows {
            let marker = r.marker.map_or(String::new(), |i| i.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                run.repetition,
                r.iteration,
                u8::from(r.detected),
                marker,
                r.obs_var.map_or(String::new(), |v| v.to_string()),
                u8::from(r.update_skipped),
                r.cost,
                r.objective,
                r.evals,
                r.step_l1,
                join(&r.theta),
                join(&r.theta_norm)
            );
        }
    }
    s
}

fn estimates_csv(m: &MethodAggregate, params: usize) -> String {
    let mut s = format!("run_id,iteration,{},{}\n", indexed("x_", params), indexed("p_", params));
    for run in &m.runs {
        for r in &run.rows {
            let _ = writeln!(s, "{},{},{},{}", run.repetition, r.iteration, join(&r.x_hat), join(&r.p_diag));
        }
    }
    s
}

fn occlusion_csv(m: &MethodAggregate, joints: usize) -> String {
    let mut s = format!("run_id,{},successes,failures\n", indexed("theta_norm_", joints));
    for run in &m.runs {
        for rec in run.memory.records() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                run.repetition,
                join(&rec.theta_norm),
                rec.successes,
                rec.failures
            );
        }
    }
    s
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let ratio = r.movement_ratio_vs_al.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.label,
            r.runs,
            r.failed_runs,
            r.pos_err_mean,
            r.pos_err_std,
            r.rot_err_mean,
            r.rot_err_std,
            r.cum_move_mean,
            r.cum_move_std,
            ratio,
            r.discarded_mean,
            r.discarded_std
        );
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes every result file of `suite` into `dir` and returns their paths.
///
/// `config` is the configuration that produced the suite; it is written back
/// as `manifest.toml` with the derived seeds so the run can be repeated.
pub fn emit_outputs(suite: &SuiteResult, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for m in &suite.methods {
        let (joints, params) = m
            .runs
            .first()
            .and_then(|r| r.rows.first())
            .map_or((0, 0), |r| (r.theta.len(), r.x_hat.len()));
        write(dir, &format!("metrics_{}.csv", m.label), &metrics_csv(m), &mut written)?;
        write(dir, &format!("aggregate_{}.csv", m.label), &aggregate_csv(m), &mut written)?;
        write(dir, &format!("selections_{}.csv", m.label), &selections_csv(m, joints), &mut written)?;
        write(dir, &format!("estimates_{}.csv", m.label), &estimates_csv(m, params), &mut written)?;
        write(dir, &format!("occlusion_{}.csv", m.label), &occlusion_csv(m, joints), &mut written)?;
    }
    write(dir, "summary.csv", &summary_csv(&summary_rows(suite)), &mut written)?;
    let manifest = config.to_manifest().to_toml_string()?;
    write(dir, "manifest.toml", &manifest, &mut written)?;
    Ok(written)
}
