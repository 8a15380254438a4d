use tabular_imitation::estimators::{bc_fit, OccupancyEstimate};
use tabular_imitation::exploration::*;
use tabular_imitation::mdp::*;
use tabular_imitation::solvers::{certificate_slack, value_iteration, SaddleConfig, StepRule};

fn value(mdp: &TabularMdp, pi: &Policy) -> f64 {
    policy_value(mdp, pi, None).unwrap()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Largest probability any policy reaches `(h, s, a)` with, via value
/// iteration on the indicator reward.
fn max_reach(mdp: &TabularMdp, h: usize, s: usize, a: usize) -> f64 {
    let dims = mdp.dims();
    let mut r = vec![0.0; dims.len()];
    r[dims.idx(h, s, a)] = 1.0;
    value_iteration(mdp, &r).unwrap().1
}

#[test]
fn zero_episodes_flag_the_fallback() {
    let mdp = random_mdp(Dims::new(3, 2, 4).unwrap(), 1).unwrap();
    let out = rf_explore(&mdp, &ExplorationConfig::new(0, 3)).unwrap();
    assert!(out.uniform_fallback && out.dataset.is_empty());
    assert_eq!(out.model.total_visits(), 0);
    let learned = out.model.to_mdp().unwrap();
    assert_eq!(learned.rho(), &[1.0 / 3.0; 3]);
    // the final step has no successor, so only earlier rows matter
    let earlier = 3 * learned.dims().step_len() * 3;
    assert!(learned.kernel().to_dense()[..earlier].iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn bad_delta_is_rejected() {
    let mdp = random_mdp(Dims::new(2, 2, 2).unwrap(), 0).unwrap();
    let mut cfg = ExplorationConfig::new(10, 0);
    cfg.delta = 1.0;
    assert!(rf_explore(&mdp, &cfg).is_err());
    cfg.delta = 0.1;
    cfg.beta = Some(f64::NAN);
    assert!(rf_explore(&mdp, &cfg).is_err());
}

#[test]
fn visit_totals_are_n_times_h() {
    let mdp = random_mdp(Dims::new(4, 3, 6).unwrap(), 2).unwrap();
    for n in [1, 10, 333] {
        let out = rf_explore(&mdp, &ExplorationConfig::new(n, 8)).unwrap();
        assert_eq!(out.model.total_visits(), (n * 6) as u64);
        assert_eq!(out.model.episodes(), n as u64);
        assert_eq!(fit_empirical_model_visits(&out), out.model.total_visits());
    }
}

fn fit_empirical_model_visits(out: &Exploration) -> u64 {
    tabular_imitation::estimators::fit_empirical_model(&out.dataset).total_visits()
}

#[test]
fn reachable_triples_get_visited() {
    let envs = [
        random_mdp(Dims::new(4, 3, 4).unwrap(), 11).unwrap(),
        make_reset_cliff(5, 3, 4, 100).unwrap().0,
    ];
    for mdp in &envs {
        let dims = mdp.dims();
        let mut targets = vec![];
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    if max_reach(mdp, h, s, a) >= 0.1 {
                        targets.push((h, s, a));
                    }
                }
            }
        }
        assert!(!targets.is_empty());
        let mut hits = vec![0usize; targets.len()];
        for seed in 0..100 {
            let out = rf_explore(mdp, &ExplorationConfig::new(5000, seed)).unwrap();
            for (hit, &(h, s, a)) in hits.iter_mut().zip(&targets) {
                *hit += usize::from(out.model.visits(h, s, a) > 0);
            }
        }
        for (hit, t) in hits.iter().zip(&targets) {
            assert!(*hit >= 99, "{t:?} visited in {hit}/100 seeds");
        }
    }
}

#[test]
fn exploration_supports_uniform_evaluation() {
    let (mdp, _) = make_reset_cliff(5, 5, 5, 100).unwrap();
    let small = rf_explore(&mdp, &ExplorationConfig::new(500, 4)).unwrap();
    let large = rf_explore(&mdp, &ExplorationConfig::new(50000, 4)).unwrap();
    let err_small = uniform_evaluation_error(&mdp, &small.model, 100, 21).unwrap();
    let err_large = uniform_evaluation_error(&mdp, &large.model, 100, 21).unwrap();
    assert!(err_large <= 0.1, "audit error {err_large}");
    assert!(err_large < err_small);
}

#[test]
fn exploration_is_deterministic() {
    let mdp = random_mdp(Dims::new(5, 3, 4).unwrap(), 6).unwrap();
    let a = rf_explore(&mdp, &ExplorationConfig::new(400, 17)).unwrap();
    let b = rf_explore(&mdp, &ExplorationConfig::new(400, 17)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dataset.to_text(), b.dataset.to_text());
    let c = rf_explore(&mdp, &ExplorationConfig::new(400, 18)).unwrap();
    assert_ne!(a.dataset, c.dataset);
}

#[test]
fn oal_without_episodes_is_uniform() {
    let (mdp, expert) = make_reset_cliff(4, 3, 3, 10).unwrap();
    let data = sample_trajectories(&mdp, &expert, 10, 0).unwrap();
    let pi = oal_solve(&mdp, &data, &OalConfig::new(0, 1)).unwrap();
    assert_eq!(pi, Policy::uniform(mdp.dims()));
}

#[test]
fn oal_policies_are_stochastic_and_deterministic_in_seed() {
    let (mdp, expert) = make_reset_cliff(5, 3, 4, 20).unwrap();
    let dims = mdp.dims();
    let data = sample_trajectories(&mdp, &expert, 20, 1).unwrap();
    for k in [1, 2, 7, 150] {
        let pi = oal_solve(&mdp, &data, &OalConfig::new(k, 5)).unwrap();
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                let row = pi.row(h, s);
                assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert_eq!(pi, oal_solve(&mdp, &data, &OalConfig::new(k, 5)).unwrap());
    }
}

#[test]
fn oal_gap_shrinks_with_more_episodes() {
    let (mdp, expert) = make_reset_cliff(20, 5, 20, 100).unwrap();
    let v_e = value(&mdp, &expert);
    let mut stats = vec![];
    for k in [1000, 10000, 20000] {
        let gaps: Vec<f64> = (0..20)
            .map(|seed| {
                let data = sample_trajectories(&mdp, &expert, 100, seed).unwrap();
                let pi = oal_solve(&mdp, &data, &OalConfig::new(k, derive_seed(seed, 9))).unwrap();
                v_e - value(&mdp, &pi)
            })
            .collect();
        stats.push(mean_std(&gaps));
    }
    for w in stats.windows(2) {
        let ((m0, s0), (m1, _)) = (w[0], w[1]);
        assert!(m1 <= m0 + s0, "{stats:?}");
    }
}

#[test]
fn mb_tail_needs_two_trajectories() {
    let (mdp, expert) = make_reset_cliff(4, 3, 3, 10).unwrap();
    let data = sample_trajectories(&mdp, &expert, 1, 0).unwrap();
    let budget = InteractionBudget::split_evenly(1, 100);
    let err = mb_tail(&mdp, &data, &budget, &SaddleConfig::new(10, StepRule::Adaptive), 0, &MbTailOracles::default())
        .unwrap_err();
    assert!(err.to_string().starts_with("split"), "{err}");
}

#[test]
fn mb_tail_with_exact_oracles_meets_the_certificate() {
    for (i, t) in [(0u64, 200), (1, 2000)] {
        let (mdp, expert) = make_reset_cliff(5, 3, 4, 50).unwrap();
        let data = sample_trajectories(&mdp, &expert, 10, i).unwrap();
        let oracles = MbTailOracles {
            model: Some(mdp.clone()),
            estimate: Some(OccupancyEstimate::exact(&occupancy(&mdp, &expert).unwrap())),
        };
        let out = mb_tail(
            &mdp,
            &data,
            &InteractionBudget::default(),
            &SaddleConfig::new(t, StepRule::Adaptive),
            i,
            &oracles,
        )
        .unwrap();
        let gap = value(&mdp, &expert) - value(&mdp, &out.policy);
        assert!(gap <= certificate_slack(mdp.dims(), t), "T={t} gap {gap}");
    }
}

#[test]
fn mb_tail_is_deterministic() {
    let (mdp, expert) = make_reset_cliff(4, 3, 4, 20).unwrap();
    let data = sample_trajectories(&mdp, &expert, 20, 3).unwrap();
    let budget = InteractionBudget::split_evenly(20, 600);
    let saddle = SaddleConfig::new(300, StepRule::Adaptive);
    let a = mb_tail(&mdp, &data, &budget, &saddle, 4, &MbTailOracles::default()).unwrap();
    let b = mb_tail(&mdp, &data, &budget, &saddle, 4, &MbTailOracles::default()).unwrap();
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.estimate.as_slice(), b.estimate.as_slice());
    assert_eq!(a.planning_model, b.planning_model);
}

#[test]
fn mb_tail_beats_bc_on_reset_cliff() {
    let (mdp, expert) = make_reset_cliff(5, 5, 5, 100).unwrap();
    let v_e = value(&mdp, &expert);
    let budget = InteractionBudget {
        expert_m: 100,
        estimator_rollouts: 5000,
        exploration_episodes: 20000,
        online_episodes: 0,
    };
    let saddle = SaddleConfig::new(5000, StepRule::Adaptive);
    let (mut mb, mut bc) = (0.0, 0.0);
    for seed in 0..20 {
        let data = sample_trajectories(&mdp, &expert, 100, seed).unwrap();
        let out = mb_tail(&mdp, &data, &budget, &saddle, derive_seed(seed, 5), &MbTailOracles::default()).unwrap();
        mb += v_e - value(&mdp, &out.policy);
        bc += v_e - value(&mdp, &bc_fit(&data).policy);
    }
    assert!(mb <= bc, "MB-TAIL mean {} vs BC mean {}", mb / 20.0, bc / 20.0);
}

/// Mixes the transition rows of `mdp` with those of `other`, keeping rewards
/// and the initial distribution.
fn mix_kernel(mdp: &TabularMdp, other: &TabularMdp, lambda: f64) -> TabularMdp {
    let p = mdp.kernel().to_dense();
    let q = other.kernel().to_dense();
    let mixed: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect();
    let kernel = TransitionKernel::from_dense(mdp.dims(), &mixed).unwrap();
    TabularMdp::new(kernel, mdp.reward().to_vec(), mdp.rho().to_vec()).unwrap()
}

/// Bound on `|P^pi - Phat^pi|_1` valid for every policy when the models
/// share the initial distribution.
fn simulation_bound(truth: &TabularMdp, model: &TabularMdp) -> f64 {
    let dims = truth.dims();
    let (p, q) = (truth.kernel().to_dense(), model.kernel().to_dense());
    let per_step: Vec<f64> = (0..dims.horizon)
        .map(|h| {
            (0..dims.step_len())
                .map(|i| {
                    let base = (h * dims.step_len() + i) * dims.states;
                    l1_distance(&p[base..base + dims.states], &q[base..base + dims.states])
                })
                .fold(0.0, f64::max)
        })
        .collect();
    (0..dims.horizon).map(|h| per_step[..h].iter().sum::<f64>()).sum()
}

#[test]
fn errors_compose_additively() {
    let dims = Dims::new(4, 3, 4).unwrap();
    for seed in 0..12u64 {
        let mdp = random_mdp(dims, seed).unwrap();
        let noise = random_mdp(dims, seed + 100).unwrap();
        let lambda = [0.0, 0.05, 0.2][seed as usize % 3];
        let mu = [0.0, 0.1, 0.3, 0.6][seed as usize % 4];
        let model = mix_kernel(&mdp, &noise, lambda);
        let (expert, _) = value_iteration(&mdp, mdp.reward()).unwrap();
        let occ_e = occupancy(&mdp, &expert).unwrap();
        let occ_u = occupancy(&mdp, &Policy::uniform(dims)).unwrap();
        let est: Vec<f64> = occ_e
            .as_slice()
            .iter()
            .zip(occ_u.as_slice())
            .map(|(e, u)| (1.0 - mu) * e + mu * u)
            .collect();
        let est = OccupancyEstimate::new(dims, est, tabular_imitation::estimators::EstimatorKind::Mle).unwrap();
        let eps_est = l1_distance(est.as_slice(), occ_e.as_slice());
        let eps_rfe = simulation_bound(&mdp, &model);

        let data = sample_trajectories(&mdp, &expert, 4, seed).unwrap();
        let oracles = MbTailOracles {
            model: Some(model.clone()),
            estimate: Some(est.clone()),
        };
        let t = 200 + 100 * seed as usize;
        let out = mb_tail(
            &mdp,
            &data,
            &InteractionBudget::default(),
            &SaddleConfig::new(t, StepRule::Adaptive),
            seed,
            &oracles,
        )
        .unwrap();
        let on_model = |pi: &Policy| l1_distance(occupancy(&model, pi).unwrap().as_slice(), est.as_slice());
        let eps_ail = on_model(&out.policy) - on_model(&expert);
        let gap = value(&mdp, &expert) - value(&mdp, &out.policy);
        let bound = 2.0 * eps_est + 2.0 * eps_rfe + eps_ail + 1e-6;
        assert!(gap <= bound, "seed {seed}: gap {gap} > {bound}");
    }
}
