//! Planning and the adversarial-imitation solvers.

mod baselines;
mod saddle;

pub use baselines::{fem_solve, gail_solve, gtal_solve, GAIL_DISCRIMINATOR_FLOOR};
pub use saddle::{
    adaptive_step, certificate_slack, fixed_step, ogd_saddle_solve, vail_closed_form_standard_imitation,
    ClosedFormSelection, RewardWeights, SaddleConfig, SolveReport, StepRule,
};

use crate::error::{Error, Result};
use crate::mdp::{Dims, Policy, TabularMdp, TransitionKernel};

/// Backward induction. Returns an optimal deterministic policy for `reward`
/// (entries in `[-1, 1]`) and its value under the MDP's initial distribution.
///
/// Ties go to the lowest action index.
pub fn value_iteration(mdp: &TabularMdp, reward: &[f64]) -> Result<(Policy, f64)> {
    let dims = mdp.dims();
    dims.ensure_len(reward.len(), "reward")?;
    check_reward_range(reward)?;
    let (actions, v1) = plan_greedy(mdp.kernel(), reward);
    let value = crate::mdp::dot(mdp.rho(), &v1);
    Ok((Policy::from_actions(dims, &actions)?, value))
}

pub(crate) fn check_reward_range(reward: &[f64]) -> Result<()> {
    match reward.iter().enumerate().find(|(_, &v)| !(-1.0..=1.0).contains(&v)) {
        Some((i, &v)) => Err(Error::OutOfRange {
            what: "reward",
            index: i,
            value: v,
        }),
        None => Ok(()),
    }
}

/// Greedy actions `actions[h * S + s]` and the step-0 optimal values.
pub(crate) fn plan_greedy(kernel: &TransitionKernel, reward: &[f64]) -> (Vec<usize>, Vec<f64>) {
    plan_with(kernel.dims(), reward, |h, s, a, v| kernel.expectation(h, s, a, v))
}

/// Backward induction with a caller-supplied next-step expectation.
pub(crate) fn plan_with<F>(dims: Dims, reward: &[f64], expect: F) -> (Vec<usize>, Vec<f64>)
where
    F: Fn(usize, usize, usize, &[f64]) -> f64,
{
    let (n_s, n_a) = (dims.states, dims.actions);
    let mut actions = vec![0; dims.horizon * n_s];
    let mut next = vec![0.0; n_s];
    let mut cur = vec![0.0; n_s];
    for h in (0..dims.horizon).rev() {
        for s in 0..n_s {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for a in 0..n_a {
                let mut q = reward[dims.idx(h, s, a)];
                if h + 1 < dims.horizon {
                    q += expect(h, s, a, &next);
                }
                if q > best {
                    best = q;
                    arg = a;
                }
            }
            cur[s] = best;
            actions[h * n_s + s] = arg;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    (actions, next)
}

/// `Q^pi_h(s, a)` for `reward`, flattened like an occupancy table.
pub fn action_value(mdp: &TabularMdp, policy: &Policy, reward: &[f64]) -> Result<Vec<f64>> {
    let dims = mdp.dims();
    dims.ensure_eq(&policy.dims(), "policy vs mdp")?;
    dims.ensure_len(reward.len(), "reward")?;
    Ok(evaluate_q(mdp.kernel(), policy, reward))
}

pub(crate) fn evaluate_q(kernel: &TransitionKernel, policy: &Policy, reward: &[f64]) -> Vec<f64> {
    evaluate_q_with(kernel.dims(), policy, reward, |h, s, a, v| kernel.expectation(h, s, a, v))
}

pub(crate) fn evaluate_q_with<F>(dims: Dims, policy: &Policy, reward: &[f64], expect: F) -> Vec<f64>
where
    F: Fn(usize, usize, usize, &[f64]) -> f64,
{
    let (n_s, n_a) = (dims.states, dims.actions);
    let mut q = vec![0.0; dims.len()];
    let mut next_v = vec![0.0; n_s];
    for h in (0..dims.horizon).rev() {
        let mut v = vec![0.0; n_s];
        for s in 0..n_s {
            let row = policy.row(h, s);
            for a in 0..n_a {
                let i = dims.idx(h, s, a);
                let mut val = reward[i];
                if h + 1 < dims.horizon {
                    val += expect(h, s, a, &next_v);
                }
                q[i] = val;
                v[s] += row[a] * val;
            }
        }
        next_v = v;
    }
    q
}
