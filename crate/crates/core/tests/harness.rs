use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bodycal::harness::{self, seeds, ExperimentConfig};
use bodycal::metrics;
use bodycal::noise::NoiseMode;
use bodycal::selection::Method;

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.iterations = 4;
    cfg.experiment.repetitions = 3;
    cfg.experiment.eval_configs = 40;
    cfg.experiment.master_seed = 11;
    cfg.selection.budget = 40;
    cfg
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn single_runs_are_deterministic() {
    let exp = small_config().build().unwrap();
    for m in Method::ALL {
        let a = harness::run_single(&exp, m, 1).unwrap();
        let b = harness::run_single(&exp, m, 1).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.run_seed, seeds::run_seed(11, m, 1));
    }
}

#[test]
fn methods_share_initial_conditions() {
    let exp = small_config().build().unwrap();
    for rep in 0..2 {
        let runs: Vec<_> = Method::ALL
            .iter()
            .map(|&m| harness::run_single(&exp, m, rep).unwrap())
            .collect();
        for r in &runs[1..] {
            assert_eq!(r.initial_theta, runs[0].initial_theta);
            assert_eq!(r.init_seed, runs[0].init_seed);
            assert_eq!(r.initial_pos_err_mm, runs[0].initial_pos_err_mm);
            assert_eq!(r.initial_rot_err_deg, runs[0].initial_rot_err_deg);
        }
        assert_ne!(runs[0].run_seed, runs[1].run_seed);
    }
}

#[test]
fn row_bookkeeping_is_consistent() {
    let exp = small_config().build().unwrap();
    let limits = &exp.world.limits;
    for m in Method::ALL {
        let run = harness::run_single(&exp, m, 0).unwrap();
        assert_eq!(run.rows.len(), 4);
        let mut prev = limits.denormalize(&run.initial_norm).unwrap();
        let mut cum = 0.0;
        let mut discarded = 0;
        for (k, row) in run.rows.iter().enumerate() {
            assert_eq!(row.iteration, k + 1);
            let theta = limits.denormalize(&row.theta_norm).unwrap();
            cum += metrics::step_deg(&prev, &theta);
            assert!((row.cum_move_deg - cum).abs() < 1e-9);
            discarded += usize::from(!row.detected);
            assert_eq!(row.discarded_so_far, discarded);
            assert_eq!(row.marker.is_some(), row.detected);
            assert_eq!(row.obs_var.is_some(), row.detected);
            assert!(row.pos_err_mm.is_finite() && row.rot_err_deg.is_finite());
            assert!(row.p_diag.iter().all(|v| *v >= 0.0));
            if m == Method::Ccsal {
                let prev_norm = prev.normalize();
                let linf = prev_norm
                    .iter()
                    .zip(&row.theta_norm)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(linf <= exp.cost.delta + 1e-12);
            }
            prev = theta;
        }
        assert_eq!(run.discarded(), discarded);
        assert_eq!(run.memory.discarded() as usize, discarded);
    }
}

#[test]
fn suite_matches_sequential_runs() {
    let exp = small_config().build().unwrap();
    let suite = harness::run_suite(&exp);
    assert_eq!(suite.methods.len(), 4);
    for agg in &suite.methods {
        assert!(agg.failures.is_empty());
        assert_eq!(agg.runs.len(), 3);
        for (rep, run) in agg.runs.iter().enumerate() {
            let seq = harness::run_single(&exp, agg.method, rep).unwrap();
            assert_eq!(run.repetition, rep);
            assert_eq!(run.rows, seq.rows);
        }
        let stats = harness::aggregate(&agg.runs);
        assert_eq!(stats, agg.per_iteration);
        let last: Vec<f64> = agg.runs.iter().map(|r| r.rows[3].pos_err_mm).collect();
        let (mean, std) = metrics::mean_std(&last);
        assert_eq!(stats[3].pos_err_mean, mean);
        assert_eq!(stats[3].pos_err_std, std);
    }
}

#[test]
fn outputs_have_the_documented_shape() {
    let exp = small_config().build().unwrap();
    let suite = harness::run_suite(&exp);
    let dir = tempfile::tempdir().unwrap();
    let written = harness::emit_outputs(&suite, &exp.config, dir.path()).unwrap();
    assert_eq!(written.len(), 4 * 5 + 2);

    let metrics_csv = fs::read_to_string(dir.path().join("metrics_UCSAL.csv")).unwrap();
    let mut lines = metrics_csv.lines();
    assert_eq!(lines.next(), Some(harness::METRIC_HEADER));
    assert_eq!(
        harness::METRIC_HEADER,
        "run_id,method,iteration,pos_err_mm,rot_err_deg,cum_move_deg,discarded_so_far"
    );
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 3 * 4);
    assert!(body[0].starts_with("0,UCSAL,1,"));
    assert!(body[11].starts_with("2,UCSAL,4,"));

    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[2].starts_with("AL,3,0,"));
    let al_ratio = rows[2].split(',').nth(9).unwrap();
    assert_eq!(al_ratio.parse::<f64>().unwrap(), 1.0);

    let header = |name: &str| {
        fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .split(',')
            .count()
    };
    assert_eq!(header("estimates_AL.csv"), 2 + 2 * 28);
    assert_eq!(header("selections_R.csv"), 10 + 2 * 7);
    assert_eq!(header("occlusion_CCSAL.csv"), 3 + 7);
}

#[test]
fn manifest_reproduces_the_suite_bytes() {
    let exp = small_config().build().unwrap();
    let first = tempfile::tempdir().unwrap();
    harness::emit_outputs(&harness::run_suite(&exp), &exp.config, first.path()).unwrap();

    let manifest = ExperimentConfig::load(&first.path().join("manifest.toml")).unwrap();
    let seeds = manifest.manifest.as_ref().unwrap().seeds.len();
    assert_eq!(seeds, 4 * 3);
    let again = manifest.build().unwrap();
    let second = tempfile::tempdir().unwrap();
    harness::emit_outputs(&harness::run_suite(&again), &again.config, second.path()).unwrap();

    assert_eq!(read_dir(first.path()), read_dir(second.path()));
}

#[test]
fn empty_method_list_writes_header_only_summary() {
    let mut cfg = small_config();
    cfg.experiment.methods.clear();
    let exp = cfg.build().unwrap();
    let suite = harness::run_suite(&exp);
    let dir = tempfile::tempdir().unwrap();
    harness::emit_outputs(&suite, &exp.config, dir.path()).unwrap();
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn constant_noise_shares_noise_draws_and_relabels() {
    let mut cfg = small_config();
    cfg.experiment.methods = vec![Method::Random];
    let pdn = harness::run_single(&cfg.build().unwrap(), Method::Random, 0).unwrap();
    cfg.experiment.noise_mode = NoiseMode::Constant;
    let exp = cfg.build().unwrap();
    let cn = harness::run_single(&exp, Method::Random, 0).unwrap();
    let thetas = |r: &harness::RunRecord| r.rows.iter().map(|x| x.theta.clone()).collect::<Vec<_>>();
    assert_eq!(thetas(&pdn), thetas(&cn));
    for row in cn.rows.iter().filter(|r| r.detected) {
        assert_eq!(row.obs_var, Some(exp.config.noise.constant_sigma2));
    }
    assert_eq!(harness::run_suite(&exp).methods[0].label, "R-CN");
}

#[test]
fn uncounted_discards_extend_the_run() {
    let mut cfg = small_config();
    cfg.experiment.count_discarded = false;
    cfg.experiment.iterations = 6;
    let exp = cfg.build().unwrap();
    let run = harness::run_single(&exp, Method::Random, 0).unwrap();
    let detected = run.rows.iter().filter(|r| r.detected).count();
    assert_eq!(detected, 6);
    assert_eq!(run.rows.len(), 6 + run.discarded());
    assert!(run.rows.last().unwrap().detected);
}

#[test]
fn shipped_desk_config_matches_defaults_at_reduced_scale() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.experiment.repetitions, 10);
    assert_eq!(cfg.experiment.iterations, 50);
    let mut expected = ExperimentConfig::default();
    expected.experiment.repetitions = 10;
    expected.experiment.output_dir = cfg.experiment.output_dir.clone();
    assert_eq!(cfg.selection, expected.selection);
    assert_eq!(cfg.estimator, expected.estimator);
    assert_eq!(cfg.noise, expected.noise);
    assert_eq!(cfg.occlusion, expected.occlusion);
    assert_eq!(cfg.experiment, expected.experiment);
    let exp = cfg.build().unwrap();
    assert_eq!(exp.world.joint_count(), 7);
}
