use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn small_config(algs: &[Algorithm], values: Vec<usize>, seeds: usize) -> ExperimentConfig {
    let mut env = EnvironmentSpec::new(EnvFamily::StandardImitation, 4, 3, 3);
    env.rho = Some(vec![0.25; 4]);
    let mut cfg = ExperimentConfig::new(env, algs.to_vec(), SweepAxis::ExpertM, values);
    cfg.seeds = seeds;
    cfg.iterations = Some(50);
    cfg
}

#[test]
fn slope_of_linear_and_constant() {
    let lin: Vec<(f64, f64)> = (1..8).map(|i| (i as f64, 3.0 * i as f64)).collect();
    assert!((loglog_slope(&lin).unwrap() - 1.0).abs() < 1e-12);
    let flat: Vec<(f64, f64)> = (1..8).map(|i| (i as f64 * 10.0, 0.7)).collect();
    assert!(loglog_slope(&flat).unwrap().abs() < 1e-12);
}

#[test]
fn slope_of_noisy_power_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let x = 10f64.powf(2.0 + 0.25 * i as f64);
                (x, 2.0 * x.powf(-0.5) * (1.0 + rng.gen_range(-0.05..0.05)))
            })
            .collect();
        assert!((loglog_slope(&pts).unwrap() + 0.5).abs() <= 0.05);
    }
}

#[test]
fn slope_drops_nonpositive_points() {
    let pts = [(1.0, 0.0), (10.0, 1.0), (100.0, 10.0), (1000.0, -1.0)];
    assert!((loglog_slope(&pts).unwrap() - 1.0).abs() < 1e-12);
    assert!(loglog_slope(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
    assert!(loglog_slope(&[(3.0, 1.0), (3.0, 2.0)]).is_err());
    assert!(loglog_slope(&[]).is_err());
}

#[test]
fn empty_report_is_header_only() {
    let (text, summary) = render_report(&[]);
    assert_eq!(text, format!("{ROW_HEADER}\n"));
    assert!(summary.aggregates.is_empty() && summary.slopes.is_empty());
}

#[test]
fn report_block_sizes() {
    let cfg = small_config(&[Algorithm::Bc, Algorithm::MimicMdExact], vec![4, 16, 64], 20);
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 120);
    assert!(rows.iter().all(|r| r.error.is_none()));
    let (text, summary) = render_report(&rows);
    let blocks: Vec<&str> = text.split("\n\n").collect();
    assert_eq!(blocks.len(), 3);
    assert_eq!(blocks[0].lines().count(), 121);
    assert_eq!(blocks[1].lines().count(), 7);
    assert_eq!(blocks[2].lines().count(), 3);
    assert_eq!(summary.aggregates.len(), 6);
    assert_eq!(summary.slopes.len(), 2);
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn aggregates_are_arithmetic_means() {
    let cfg = small_config(&[Algorithm::Vail, Algorithm::Bc], vec![5, 10], 7);
    let rows = run_sweep(&cfg).unwrap();
    let summary = summarize(&rows);
    for agg in &summary.aggregates {
        let gaps: Vec<f64> = rows
            .iter()
            .filter(|r| r.alg == agg.alg && r.sweep_value == agg.sweep_value)
            .map(|r| r.gap)
            .collect();
        assert_eq!(agg.count, gaps.len());
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((agg.mean - mean).abs() < 1e-12);
        assert!((agg.sem - agg.std / (gaps.len() as f64).sqrt()).abs() < 1e-15);
    }
    let means = summary.means(Algorithm::Vail);
    assert_eq!(means.iter().map(|m| m.0).collect::<Vec<_>>(), vec![5, 10]);
    assert!(summary.slope(Algorithm::Bc).is_some());
    assert!(summary.slope(Algorithm::Gail).is_none());
}

#[test]
fn parallel_matches_serial() {
    let cfg = small_config(&[Algorithm::Vail, Algorithm::Tail, Algorithm::Fem, Algorithm::Gail], vec![4, 8], 3);
    let par = run_sweep_with(&cfg, true).unwrap();
    let ser = run_sweep_with(&cfg, false).unwrap();
    assert_eq!(render_report(&par).0, render_report(&ser).0);
}

#[test]
fn one_seed_one_value_one_row() {
    let cfg = small_config(&[Algorithm::Gtal], vec![10], 1);
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!((row.alg, row.sweep_value, row.seed, row.m), (Algorithm::Gtal, 10, 0, 10));
    assert!((row.expert_value - 3.0).abs() < 1e-12);
    assert!((-1e-9..=3.0).contains(&row.gap));
    assert_eq!(row.runtime_ms, None);
}

#[test]
fn bc_on_covered_deterministic_env_is_exact() {
    let mut env = EnvironmentSpec::new(EnvFamily::StandardImitation, 1, 3, 6);
    env.rho = Some(vec![1.0]);
    let mut cfg = ExperimentConfig::new(env, vec![Algorithm::Bc], SweepAxis::ExpertM, vec![1, 2, 5]);
    cfg.seeds = 4;
    let rows = run_sweep(&cfg).unwrap();
    assert!(rows.iter().all(|r| r.gap == 0.0));
}

#[test]
fn reset_cliff_defaults_m_param_to_m() {
    let env = EnvironmentSpec::new(EnvFamily::ResetCliff, 5, 3, 4);
    let mut cfg = ExperimentConfig::new(env, vec![Algorithm::Bc], SweepAxis::ExpertM, vec![10, 40]);
    cfg.iterations = Some(10);
    let rows = run_sweep(&cfg).unwrap();
    assert!(rows.iter().all(|r| r.error.is_none() && r.expert_value == 4.0));
}

#[test]
fn failing_cells_become_error_rows() {
    let mut cfg = small_config(&[Algorithm::Tail, Algorithm::Bc], vec![1, 2], 1);
    cfg.iterations = Some(5);
    let rows = run_sweep(&cfg).unwrap();
    let tail_m1 = rows.iter().find(|r| r.alg == Algorithm::Tail && r.m == 1).unwrap();
    let msg = tail_m1.error.as_deref().unwrap();
    assert!(msg.contains("split"), "{msg}");
    assert!(tail_m1.gap.is_nan());
    assert!(rows.iter().filter(|r| r.alg == Algorithm::Bc).all(|r| r.error.is_none()));
    let (text, summary) = render_report(&rows);
    let line = text.lines().find(|l| l.starts_with("standard_imitation,tail,expert_m,1,")).unwrap();
    assert_eq!(line.split(',').count(), 13);
    assert_eq!(summary.means(Algorithm::Tail).len(), 1);
}

#[test]
fn timing_column_only_when_requested() {
    let mut cfg = small_config(&[Algorithm::Bc], vec![3], 1);
    cfg.timing = true;
    assert!(run_sweep(&cfg).unwrap()[0].runtime_ms.is_some());
}

#[test]
fn cell_seed_ignores_algorithm_and_separates_cells() {
    assert_ne!(cell_seed(0, 10, 0), cell_seed(0, 10, 1));
    assert_ne!(cell_seed(0, 10, 0), cell_seed(0, 11, 0));
    assert_ne!(cell_seed(0, 10, 0), cell_seed(1, 10, 0));
    // all algorithms see the same expert data
    let cfg = small_config(&[Algorithm::Bc, Algorithm::MimicMdExact], vec![1000], 1);
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows[0].expert_value, rows[1].expert_value);
}

#[test]
fn config_parsing() {
    let text = "\
# sweep over m
family = reset_cliff
S = 5
A = 5
H = 5
alg = bc, vail tail
sweep = expert_m
values = 100, 1000
T = 200
step_rule = fixed
seeds = 3
base_seed = 9
out = /tmp/x.csv
";
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.algorithms, vec![Algorithm::Bc, Algorithm::Vail, Algorithm::Tail]);
    assert_eq!(cfg.values, vec![100, 1000]);
    assert_eq!(cfg.iterations_for(Algorithm::Vail, 5), 200);
    assert_eq!(cfg.step_rule, StepRule::Fixed);
    assert_eq!((cfg.seeds, cfg.base_seed), (3, 9));
    assert_eq!(cfg.env.family, EnvFamily::ResetCliff);
    assert!(cfg.validate().is_ok());

    assert!(matches!(ExperimentConfig::parse("S = 3\nbogus = 1\n"), Err(Error::Parse { line: 2, .. })));
    assert!(matches!(ExperimentConfig::parse("alg = dagger\n"), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(ExperimentConfig::parse("step_rule = slow\n"), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(ExperimentConfig::parse("seeds = many\n"), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn config_validation() {
    let ok = small_config(&[Algorithm::Bc], vec![1, 2], 1);
    assert!(ok.validate().is_ok());
    let mut bad = ok.clone();
    bad.values = vec![2, 2];
    assert!(bad.validate().is_err());
    bad.values = vec![0, 1];
    assert!(bad.validate().is_err());
    let mut bad = ok.clone();
    bad.seeds = 0;
    assert!(run_sweep(&bad).is_err());
    let mut bad = ok.clone();
    bad.algorithms.clear();
    assert!(bad.validate().is_err());
    let mut bad = ok.clone();
    bad.sweep = SweepAxis::Horizon;
    assert!(bad.validate().is_err());
    bad.m = Some(5);
    assert!(bad.validate().is_ok());
}

#[test]
fn default_iterations_follow_task_table() {
    let mut cfg = small_config(&[Algorithm::Bc], vec![1], 1);
    cfg.iterations = None;
    assert_eq!(cfg.iterations_for(Algorithm::Vail, 10), 8000);
    cfg.sweep = SweepAxis::Horizon;
    assert_eq!(cfg.iterations_for(Algorithm::Vail, 10), 500);
    cfg.env.family = EnvFamily::ResetCliff;
    assert_eq!(cfg.iterations_for(Algorithm::Vail, 30), 120);
    assert_eq!(cfg.iterations_for(Algorithm::Gtal, 30), 120);
    assert_eq!(cfg.iterations_for(Algorithm::Tail, 30), 30);
    assert_eq!(cfg.iterations_for(Algorithm::Fem, 30), 300);
    cfg.sweep = SweepAxis::ExpertM;
    assert_eq!(cfg.iterations_for(Algorithm::Fem, 30), 20000);
}

#[test]
fn algorithm_names_round_trip() {
    for alg in Algorithm::ALL {
        assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
    }
    for axis in [SweepAxis::Horizon, SweepAxis::ExpertM, SweepAxis::Interactions] {
        assert_eq!(axis.name().parse::<SweepAxis>().unwrap(), axis);
    }
}

#[test]
fn emit_report_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let rows = run_sweep(&small_config(&[Algorithm::Bc], vec![2, 4], 2)).unwrap();
    let summary = emit_report(&rows, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), render_report(&rows).0);
    assert_eq!(summary.aggregates.len(), 2);
    assert!(emit_report(&rows, dir.path().join("missing/r.csv")).is_err());
}
