use super::saddle::SolveReport;
use super::{evaluate_q, plan_greedy};
use crate::error::{Error, Result};
use crate::estimators::OccupancyEstimate;
use crate::mdp::{
    l1_distance, occupancy, occupancy_of_actions, occupancy_with_rho, policy_from_table, Policy, TabularMdp,
};

/// Lower clamp on the GAIL discriminator so that `-ln D` stays finite where
/// the current policy has no mass but the estimate does.
pub const GAIL_DISCRIMINATOR_FLOOR: f64 = 1e-8;

fn check_inputs(mdp: &TabularMdp, estimate: &OccupancyEstimate, iterations: usize) -> Result<()> {
    mdp.dims().ensure_eq(&estimate.dims(), "estimate vs mdp")?;
    if iterations == 0 {
        return Err(Error::invalid("solver needs at least one iteration"));
    }
    Ok(())
}

fn finish(mdp: &TabularMdp, estimate: &OccupancyEstimate, policy: &Policy, report: &mut SolveReport) -> Result<()> {
    report.achieved_objective = l1_distance(occupancy(mdp, policy)?.as_slice(), estimate.as_slice());
    Ok(())
}

/// Frank–Wolfe on `½ Σ_h ‖P_h - estimate_h‖₂²` over the occupancy polytope,
/// starting from the uniform policy, with exact line search.
pub fn fem_solve(mdp: &TabularMdp, estimate: &OccupancyEstimate, iterations: usize) -> Result<(Policy, SolveReport)> {
    check_inputs(mdp, estimate, iterations)?;
    let dims = mdp.dims();
    let est = estimate.as_slice();
    let mut x = occupancy(mdp, &Policy::uniform(dims))?.into_vec();
    let mut report = SolveReport::with_capacity(iterations);
    let mut dir = vec![0.0; dims.len()];

    for _ in 0..iterations {
        // Negative gradient, rescaled into the reward box for the linear step.
        for ((r, &e), &xi) in dir.iter_mut().zip(est).zip(&x) {
            *r = e - xi;
        }
        let grad_norm = dir.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut gamma = 0.0;
        if scale > 0.0 {
            let reward: Vec<f64> = dir.iter().map(|g| g / scale).collect();
            let (actions, _) = plan_greedy(mdp.kernel(), &reward);
            let vertex = occupancy_of_actions(mdp.kernel(), mdp.rho(), &actions);
            let (mut num, mut den) = (0.0, 0.0);
            for ((g, &v), &xi) in dir.iter().zip(&vertex).zip(&x) {
                let d = v - xi;
                num += g * d;
                den += d * d;
            }
            if den > 0.0 {
                gamma = (num / den).clamp(0.0, 1.0);
                for (xi, &v) in x.iter_mut().zip(&vertex) {
                    *xi += gamma * (v - *xi);
                }
            }
        }
        let half_sq = 0.5 * x.iter().zip(est).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        report.push(l1_distance(&x, est), grad_norm, gamma, half_sq);
    }

    let policy = policy_from_table(dims, &x);
    finish(mdp, estimate, &policy, &mut report)?;
    Ok((policy, report))
}

/// Exponential weights over a finite set, stored as log-weights.
#[derive(Debug, Clone)]
pub(crate) struct Hedge {
    logits: Vec<f64>,
}

impl Hedge {
    pub(crate) fn new(n: usize) -> Self {
        Hedge { logits: vec![0.0; n] }
    }

    pub(crate) fn probabilities(&self) -> Vec<f64> {
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = self.logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = p.iter().sum();
        for v in &mut p {
            *v /= z;
        }
        p
    }

    pub(crate) fn update(&mut self, losses: &[f64], eta: f64) {
        for (l, loss) in self.logits.iter_mut().zip(losses) {
            *l -= eta * loss;
        }
    }
}

/// Multiplicative weights over the `2HSA` signed coordinates of the `ℓ∞`
/// dual, against a best-responding policy player.
pub fn gtal_solve(mdp: &TabularMdp, estimate: &OccupancyEstimate, iterations: usize) -> Result<(Policy, SolveReport)> {
    check_inputs(mdp, estimate, iterations)?;
    let dims = mdp.dims();
    let n = dims.len();
    let est = estimate.as_slice();
    let eta = (8.0 * ((2 * n) as f64).ln() / iterations as f64).sqrt();
    let mut hedge = Hedge::new(2 * n);
    let mut sum_occ = vec![0.0; n];
    let mut losses = vec![0.0; 2 * n];
    let mut report = SolveReport::with_capacity(iterations);

    for t in 1..=iterations {
        let p = hedge.probabilities();
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let reward: Vec<f64> = (0..n).map(|i| p[i] - p[n + i]).collect();
        let (actions, _) = plan_greedy(mdp.kernel(), &reward);
        let occ = occupancy_of_actions(mdp.kernel(), mdp.rho(), &actions);
        let mut norm_sq = 0.0;
        for i in 0..n {
            let g = occ[i] - est[i];
            norm_sq += g * g;
            losses[i] = g;
            losses[n + i] = -g;
            sum_occ[i] += occ[i];
        }
        hedge.update(&losses, eta);
        let inv = 1.0 / t as f64;
        let (mut l1, mut linf) = (0.0, 0.0f64);
        for (s, e) in sum_occ.iter().zip(est) {
            let d = (s * inv - e).abs();
            l1 += d;
            linf = linf.max(d);
        }
        report.push(l1, norm_sq.sqrt(), eta, linf);
    }

    let inv = 1.0 / iterations as f64;
    let mean: Vec<f64> = sum_occ.iter().map(|s| s * inv).collect();
    let policy = policy_from_table(dims, &mean);
    finish(mdp, estimate, &policy, &mut report)?;
    Ok((policy, report))
}

/// GAIL with the optimal discriminator in closed form and mirror-descent
/// policy updates `pi <- pi * exp(eta * Q)`, starting from the uniform policy.
///
/// Returns the last iterate.
pub fn gail_solve(
    mdp: &TabularMdp,
    estimate: &OccupancyEstimate,
    iterations: usize,
    eta: f64,
) -> Result<(Policy, SolveReport)> {
    check_inputs(mdp, estimate, iterations)?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("GAIL step size must be positive, got {eta}")));
    }
    let dims = mdp.dims();
    let n_a = dims.actions;
    let est = estimate.as_slice();
    let mut logits = vec![0.0; dims.len()];
    let mut policy = Policy::uniform(dims);
    let mut report = SolveReport::with_capacity(iterations);

    for _ in 0..iterations {
        let occ = occupancy_with_rho(mdp.kernel(), mdp.rho(), &policy);
        let occ = occ.as_slice();
        let reward: Vec<f64> = occ
            .iter()
            .zip(est)
            .map(|(&p, &e)| -discriminator(p, e).ln())
            .collect();
        let q = evaluate_q(mdp.kernel(), &policy, &reward);
        for (l, qv) in logits.iter_mut().zip(&q) {
            *l += eta * qv;
        }
        policy = softmax_policy(dims, &mut logits)?;
        let norm = occ.iter().zip(est).map(|(p, e)| (p - e) * (p - e)).sum::<f64>().sqrt();
        let l1 = l1_distance(occ, est);
        report.push(l1, norm, eta, l1);
    }
    debug_assert_eq!(logits.len() % n_a, 0);
    finish(mdp, estimate, &policy, &mut report)?;
    Ok((policy, report))
}

/// `D* = P / (P + P̂)`, `½` when both vanish, floored at
/// [`GAIL_DISCRIMINATOR_FLOOR`].
pub(crate) fn discriminator(policy_mass: f64, expert_mass: f64) -> f64 {
    let total = policy_mass + expert_mass;
    if total == 0.0 {
        0.5
    } else {
        (policy_mass / total).max(GAIL_DISCRIMINATOR_FLOOR)
    }
}

/// Row-wise softmax of `logits`; each row is re-centred at its maximum so the
/// log-weights stay bounded.
fn softmax_policy(dims: crate::mdp::Dims, logits: &mut [f64]) -> Result<Policy> {
    let mut probs = vec![0.0; logits.len()];
    for (row, out) in logits.chunks_mut(dims.actions).zip(probs.chunks_mut(dims.actions)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for l in row.iter_mut() {
            *l -= max;
        }
        let z: f64 = row.iter().map(|l| l.exp()).sum();
        for (o, l) in out.iter_mut().zip(row.iter()) {
            *o = l.exp() / z;
        }
    }
    Policy::from_probs(dims, probs)
}
