//! Unknown-transition algorithms: a bonus-driven reward-free explorer, the
//! OAL baseline and the MB-TAIL pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{bc_fit, mb_estimate, mle_estimate, split_dataset, EmpiricalModel, OccupancyEstimate};
use crate::mdp::{derive_seed, policy_from_table, policy_value, rollout, sample_trajectories, Dims, Policy, TabularMdp, TrajectoryDataset};
use crate::solvers::{evaluate_q_with, ogd_saddle_solve, SaddleConfig, SolveReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationConfig {
    pub episodes: usize,
    pub delta: f64,
    /// Bonus scale; `ln(SAH n / delta)` when unset.
    pub beta: Option<f64>,
    pub seed: u64,
}

impl ExplorationConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        ExplorationConfig {
            episodes,
            delta: 0.1,
            beta: None,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(b) = self.beta {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::invalid(format!("bonus scale must be finite and nonnegative, got {b}")));
            }
        }
        Ok(())
    }
}

/// Default bonus scale `ln(SAH n / delta)`.
pub fn bonus_scale(dims: Dims, episodes: usize, delta: f64) -> f64 {
    ((dims.len() * episodes.max(1)) as f64 / delta).ln().max(0.0)
}

/// `min(1, sqrt(beta / max(n, 1)))`.
#[inline]
pub fn exploration_bonus(beta: f64, visits: u64) -> f64 {
    (beta / visits.max(1) as f64).sqrt().min(1.0)
}

/// Output of [`rf_explore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Exploration {
    pub dataset: TrajectoryDataset,
    pub model: EmpiricalModel,
    /// No episode was collected, so the model is the uniform fallback.
    pub uniform_fallback: bool,
}

/// Reward-free exploration: every episode plans greedily against the bonus
/// `min(1, sqrt(beta / n_h(s,a)))` under the current empirical model, runs
/// the plan in `env` and updates the counts.
pub fn rf_explore(env: &TabularMdp, config: &ExplorationConfig) -> Result<Exploration> {
    config.validate()?;
    let dims = env.dims();
    let mut model = EmpiricalModel::new(dims);
    let mut dataset = TrajectoryDataset::empty(dims);
    if config.episodes == 0 {
        log::warn!("rf_explore with zero episodes; returning the uniform model");
        return Ok(Exploration {
            dataset,
            model,
            uniform_fallback: true,
        });
    }
    let beta = config.beta.unwrap_or_else(|| bonus_scale(dims, config.episodes, config.delta));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut bonus = vec![0.0; dims.len()];
    for _ in 0..config.episodes {
        for (b, i) in bonus.iter_mut().zip(0..) {
            let (h, s, a) = unflatten(dims, i);
            *b = exploration_bonus(beta, model.visits(h, s, a));
        }
        let actions = plan_clipped(&model, &bonus);
        let policy = Policy::from_actions(dims, &actions)?;
        let tr = rollout(env, &policy, &mut rng);
        model.observe(&tr);
        dataset.push(tr)?;
    }
    Ok(Exploration {
        dataset,
        model,
        uniform_fallback: false,
    })
}

#[inline]
fn unflatten(dims: Dims, i: usize) -> (usize, usize, usize) {
    let a = i % dims.actions;
    let s = (i / dims.actions) % dims.states;
    (i / dims.step_len(), s, a)
}

/// Greedy plan on the empirical model with values clipped at the number of
/// remaining steps.
fn plan_clipped(model: &EmpiricalModel, reward: &[f64]) -> Vec<usize> {
    let dims = model.dims();
    let (n_s, n_a) = (dims.states, dims.actions);
    let mut actions = vec![0; dims.horizon * n_s];
    let mut next = vec![0.0; n_s];
    for h in (0..dims.horizon).rev() {
        let cap = (dims.horizon - h) as f64;
        let mut cur = vec![0.0; n_s];
        for s in 0..n_s {
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for a in 0..n_a {
                let mut q = reward[dims.idx(h, s, a)];
                if h + 1 < dims.horizon {
                    q += model.expectation(h, s, a, &next);
                }
                if q > best {
                    best = q;
                    arg = a;
                }
            }
            cur[s] = best.min(cap);
            actions[h * n_s + s] = arg;
        }
        next = cur;
    }
    actions
}

/// Occupancy of `policy` under the empirical model.
pub fn model_occupancy(model: &EmpiricalModel, policy: &Policy) -> Vec<f64> {
    let dims = model.dims();
    let (n_s, n_a) = (dims.states, dims.actions);
    let mut dist = vec![0.0; dims.len()];
    let mut marginal = model.rho_hat();
    for h in 0..dims.horizon {
        let mut next = vec![0.0; n_s];
        for s in 0..n_s {
            let m = marginal[s];
            if m == 0.0 {
                continue;
            }
            let row = policy.row(h, s);
            for a in 0..n_a {
                let mass = m * row[a];
                dist[dims.idx(h, s, a)] = mass;
                if mass > 0.0 && h + 1 < dims.horizon {
                    let counts = model.transition_counts(h, s, a);
                    let total: u64 = counts.iter().sum();
                    if total == 0 {
                        let u = mass / n_s as f64;
                        next.iter_mut().for_each(|x| *x += u);
                    } else {
                        for (x, &c) in next.iter_mut().zip(counts) {
                            *x += mass * c as f64 / total as f64;
                        }
                    }
                }
            }
        }
        marginal = next;
    }
    dist
}

/// Largest `|V^{pi,P,r} - V^{pi,P̂,r}|` over `pairs` random deterministic
/// policies and rewards in `[0, 1]`.
pub fn uniform_evaluation_error(env: &TabularMdp, model: &EmpiricalModel, pairs: usize, seed: u64) -> Result<f64> {
    let dims = env.dims();
    dims.ensure_eq(&model.dims(), "model vs env")?;
    let estimated = model.to_mdp()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let actions: Vec<usize> = (0..dims.horizon * dims.states).map(|_| rng.gen_range(0..dims.actions)).collect();
        let policy = Policy::from_actions(dims, &actions)?;
        let reward: Vec<f64> = (0..dims.len()).map(|_| rng.gen()).collect();
        let truth = policy_value(env, &policy, Some(&reward))?;
        let approx = policy_value(&estimated, &policy, Some(&reward))?;
        worst = worst.max((truth - approx).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OalConfig {
    pub episodes: usize,
    pub delta: f64,
    /// Reward step at episode `k` is `reward_step / sqrt(k)`.
    pub reward_step: f64,
    /// Policy step at episode `k` is `policy_step / sqrt(k)`.
    pub policy_step: f64,
    pub seed: u64,
}

impl OalConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        OalConfig {
            episodes,
            delta: 0.1,
            reward_step: 1.0,
            policy_step: 1.0,
            seed,
        }
    }
}

/// Online apprenticeship learning with an optimistic empirical model.
///
/// Each episode runs the current policy, updates the counts, takes a
/// projected gradient step on the reward toward the expert's empirical
/// occupancy and a mirror-descent step on the policy against the
/// bonus-augmented action values. The output is the policy of the mean
/// occupancy of all episode policies, each measured under the model
/// available when it was played.
pub fn oal_solve(env: &TabularMdp, expert: &TrajectoryDataset, config: &OalConfig) -> Result<Policy> {
    let dims = env.dims();
    dims.ensure_eq(&expert.dims(), "expert data vs env")?;
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", config.delta)));
    }
    if !(config.reward_step > 0.0 && config.policy_step > 0.0) {
        return Err(Error::invalid("OAL step sizes must be positive"));
    }
    if config.episodes == 0 {
        return Ok(Policy::uniform(dims));
    }
    let target = mle_estimate(expert).map_err(|e| e.in_stage("oal expert estimate"))?;
    let target = target.as_slice();
    let beta = bonus_scale(dims, config.episodes, config.delta);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = EmpiricalModel::new(dims);
    let mut w = vec![0.0; dims.len()];
    let mut logits = vec![0.0; dims.len()];
    let mut policy = Policy::uniform(dims);
    let mut sum_occ = vec![0.0; dims.len()];
    let mut reward = vec![0.0; dims.len()];

    for k in 1..=config.episodes {
        let tr = rollout(env, &policy, &mut rng);
        model.observe(&tr);
        sum_occ
            .iter_mut()
            .zip(model_occupancy(&model, &policy))
            .for_each(|(acc, p)| *acc += p);

        let scale = 1.0 / (k as f64).sqrt();
        let eta_w = config.reward_step * scale;
        for (i, (wi, &e)) in w.iter_mut().zip(target).enumerate() {
            let (h, s, a) = unflatten(dims, i);
            let visited = if tr[h] == (s, a) { 1.0 } else { 0.0 };
            *wi = (*wi + eta_w * (e - visited)).clamp(-1.0, 1.0);
        }
        for (i, r) in reward.iter_mut().enumerate() {
            let (h, s, a) = unflatten(dims, i);
            *r = w[i] + (beta / model.visits(h, s, a).max(1) as f64).sqrt();
        }
        let q = evaluate_q_with(dims, &policy, &reward, |h, s, a, v| model.expectation(h, s, a, v));
        let eta_pi = config.policy_step * scale;
        for (l, qv) in logits.iter_mut().zip(&q) {
            *l += eta_pi * qv;
        }
        policy = softmax_rows(dims, &mut logits)?;
    }
    Ok(policy_from_table(dims, &sum_occ))
}

fn softmax_rows(dims: Dims, logits: &mut [f64]) -> Result<Policy> {
    let mut probs = vec![0.0; logits.len()];
    for (row, out) in logits.chunks_mut(dims.actions).zip(probs.chunks_mut(dims.actions)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|l| *l -= max);
        let z: f64 = row.iter().map(|l| l.exp()).sum();
        out.iter_mut().zip(row.iter()).for_each(|(o, l)| *o = l.exp() / z);
    }
    Policy::from_probs(dims, probs)
}

/// Episode budgets of the unknown-transition setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InteractionBudget {
    pub expert_m: usize,
    /// BC rollouts used by the Monte-Carlo estimator.
    pub estimator_rollouts: usize,
    /// Reward-free exploration episodes.
    pub exploration_episodes: usize,
    /// Online episodes for OAL.
    pub online_episodes: usize,
}

impl InteractionBudget {
    /// MB-TAIL budget splitting `total` interaction episodes evenly between
    /// the estimator and the explorer.
    pub fn split_evenly(expert_m: usize, total: usize) -> Self {
        InteractionBudget {
            expert_m,
            estimator_rollouts: total / 2,
            exploration_episodes: total - total / 2,
            online_episodes: 0,
        }
    }
}

/// Stand-ins for the estimator and explorer stages of [`mb_tail`].
#[derive(Debug, Clone, Default)]
pub struct MbTailOracles {
    /// Planning model used instead of running the explorer.
    pub model: Option<TabularMdp>,
    /// Expert occupancy estimate used instead of the BC-rollout estimator.
    pub estimate: Option<OccupancyEstimate>,
}

#[derive(Debug, Clone)]
pub struct MbTailOutput {
    pub policy: Policy,
    pub estimate: OccupancyEstimate,
    /// The model the saddle solver planned on.
    pub planning_model: TabularMdp,
    pub report: SolveReport,
}

/// MB-TAIL: split the demonstrations, fit BC on the first half, estimate the
/// expert occupancy from BC rollouts, learn a model by reward-free
/// exploration and solve the matching problem on that model.
pub fn mb_tail(
    env: &TabularMdp,
    expert: &TrajectoryDataset,
    budget: &InteractionBudget,
    saddle: &SaddleConfig,
    seed: u64,
    oracles: &MbTailOracles,
) -> Result<MbTailOutput> {
    let dims = env.dims();
    dims.ensure_eq(&expert.dims(), "expert data vs env")?;
    if expert.len() < 2 {
        return Err(Error::EmptyDataset("MB-TAIL needs at least two expert trajectories").in_stage("split"));
    }
    let estimate = match &oracles.estimate {
        Some(est) => {
            dims.ensure_eq(&est.dims(), "injected estimate vs env")?;
            est.clone()
        }
        None => {
            let split = split_dataset(expert, derive_seed(seed, 1)).map_err(|e| e.in_stage("split"))?;
            let bc = bc_fit(split.d1());
            let rollouts = sample_trajectories(env, &bc.policy, budget.estimator_rollouts, derive_seed(seed, 2))
                .map_err(|e| e.in_stage("bc rollouts"))?;
            mb_estimate(&split, &rollouts).map_err(|e| e.in_stage("estimate"))?
        }
    };
    let planning_model = match &oracles.model {
        Some(m) => {
            dims.ensure_eq(&m.dims(), "injected model vs env")?;
            m.clone()
        }
        None => {
            let cfg = ExplorationConfig::new(budget.exploration_episodes, derive_seed(seed, 3));
            let explored = rf_explore(env, &cfg).map_err(|e| e.in_stage("exploration"))?;
            explored.model.to_mdp().map_err(|e| e.in_stage("exploration"))?
        }
    };
    let (policy, report) = ogd_saddle_solve(&planning_model, &estimate, saddle).map_err(|e| e.in_stage("saddle"))?;
    Ok(MbTailOutput {
        policy,
        estimate,
        planning_model,
        report,
    })
}
