use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::plan_greedy;
use crate::error::{Error, Result};
use crate::estimators::OccupancyEstimate;
use crate::mdp::{
    check_standard_imitation, l1_distance, occupancy, occupancy_of_actions, policy_from_table, Dims, Policy,
    TabularMdp,
};

/// Reward player of the saddle problem, kept in the unit `ℓ∞` ball.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardWeights {
    dims: Dims,
    w: Vec<f64>,
}

impl RewardWeights {
    pub fn zeros(dims: Dims) -> Self {
        RewardWeights {
            dims,
            w: vec![0.0; dims.len()],
        }
    }

    /// Wraps `w`, which must already lie in `[-1, 1]`.
    pub fn from_vec(dims: Dims, w: Vec<f64>) -> Result<Self> {
        dims.ensure_len(w.len(), "reward weights")?;
        super::check_reward_range(&w)?;
        Ok(RewardWeights { dims, w })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// `w <- Proj(w - eta * grad)`; the Euclidean projection onto the box is a clamp.
    pub fn descend(&mut self, grad: &[f64], eta: f64) {
        for (w, g) in self.w.iter_mut().zip(grad) {
            *w -= eta * g;
        }
        project_box(&mut self.w);
    }

    pub fn sup_norm(&self) -> f64 {
        self.w.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Euclidean projection onto `{w : ‖w‖∞ ≤ 1}`.
pub(crate) fn project_box(w: &mut [f64]) {
    for v in w {
        *v = v.clamp(-1.0, 1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `eta = sqrt(SA / (8T))` at every iteration.
    Fixed,
    /// `eta_t = D / sqrt(Σ_{i≤t} ‖g_i‖²)` with `D = sqrt(2HSA)`.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleConfig {
    pub iterations: usize,
    pub step_rule: StepRule,
    /// Slack of the inner solver. Value iteration is exact, so this only
    /// widens the certificates reported alongside a run.
    pub epsilon_opt: f64,
    pub initial_w: Option<RewardWeights>,
}

impl SaddleConfig {
    pub fn new(iterations: usize, step_rule: StepRule) -> Self {
        SaddleConfig {
            iterations,
            step_rule,
            epsilon_opt: 0.0,
            initial_w: None,
        }
    }
}

/// Per-iteration trace of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// L1 distance between the solver's current output occupancy and the estimate.
    pub l1_objective: Vec<f64>,
    /// Euclidean norm of `P^{pi_t} - estimate`.
    pub grad_norm: Vec<f64>,
    pub step_size: Vec<f64>,
    /// The objective the solver itself minimizes (L1 for OGD, half squared
    /// ℓ2 for FEM, ℓ∞ for GTAL, L1 for GAIL).
    pub objective: Vec<f64>,
    /// L1 objective of the returned policy, evaluated exactly.
    pub achieved_objective: f64,
}

impl SolveReport {
    pub(crate) fn with_capacity(t: usize) -> Self {
        SolveReport {
            l1_objective: Vec::with_capacity(t),
            grad_norm: Vec::with_capacity(t),
            step_size: Vec::with_capacity(t),
            objective: Vec::with_capacity(t),
            achieved_objective: f64::NAN,
        }
    }

    pub(crate) fn push(&mut self, l1: f64, grad_norm: f64, step: f64, objective: f64) {
        self.l1_objective.push(l1);
        self.grad_norm.push(grad_norm);
        self.step_size.push(step);
        self.objective.push(objective);
    }

    pub fn iterations(&self) -> usize {
        self.l1_objective.len()
    }

    /// `iteration,l1_objective,grad_norm,step_size`, one row per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,l1_objective,grad_norm,step_size\n");
        for t in 0..self.iterations() {
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e}",
                t + 1,
                self.l1_objective[t],
                self.grad_norm[t],
                self.step_size[t]
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn fixed_step(dims: Dims, iterations: usize) -> f64 {
    ((dims.states * dims.actions) as f64 / (8.0 * iterations as f64)).sqrt()
}

/// `2H sqrt(2SA/T)`: optimization slack of `T` OGD iterations.
pub fn certificate_slack(dims: Dims, iterations: usize) -> f64 {
    2.0 * dims.horizon as f64 * (2.0 * (dims.states * dims.actions) as f64 / iterations as f64).sqrt()
}

fn diameter(dims: Dims) -> f64 {
    (2.0 * dims.len() as f64).sqrt()
}

/// AdaGrad-norm step `D / sqrt(Σ ‖g_i‖²)` with `D = sqrt(2HSA)`; `D` when
/// every recorded norm is zero.
pub fn adaptive_step(dims: Dims, gradient_norm_history: &[f64]) -> Result<f64> {
    if gradient_norm_history.is_empty() {
        return Err(Error::invalid("adaptive step needs at least one gradient norm"));
    }
    if let Some((i, &g)) = gradient_norm_history.iter().enumerate().find(|(_, &g)| !(g >= 0.0)) {
        return Err(Error::OutOfRange {
            what: "gradient norm",
            index: i,
            value: g,
        });
    }
    let sum_sq: f64 = gradient_norm_history.iter().map(|g| g * g).sum();
    Ok(adaptive_from_sum(diameter(dims), sum_sq))
}

fn adaptive_from_sum(d: f64, sum_sq: f64) -> f64 {
    if sum_sq > 0.0 {
        d / sum_sq.sqrt()
    } else {
        d
    }
}

/// Online gradient descent on the reward against a best-responding policy
/// player, for `min_pi Σ_h ‖P^pi_h - estimate_h‖₁`.
///
/// Returns the policy of the mean occupancy over all iterates.
pub fn ogd_saddle_solve(
    mdp: &TabularMdp,
    estimate: &OccupancyEstimate,
    config: &SaddleConfig,
) -> Result<(Policy, SolveReport)> {
    let dims = mdp.dims();
    dims.ensure_eq(&estimate.dims(), "estimate vs mdp")?;
    let t_total = config.iterations;
    if t_total == 0 {
        return Err(Error::invalid("saddle solver needs at least one iteration"));
    }
    let mut w = match &config.initial_w {
        Some(w0) => {
            dims.ensure_eq(&w0.dims(), "initial weights vs mdp")?;
            w0.clone()
        }
        None => RewardWeights::zeros(dims),
    };
    let est = estimate.as_slice();
    let d = diameter(dims);
    let fixed = fixed_step(dims, t_total);
    let mut sum_sq = 0.0;
    let mut sum_occ = vec![0.0; dims.len()];
    let mut grad = vec![0.0; dims.len()];
    let mut report = SolveReport::with_capacity(t_total);

    for t in 1..=t_total {
        let (actions, _) = plan_greedy(mdp.kernel(), w.as_slice());
        let occ = occupancy_of_actions(mdp.kernel(), mdp.rho(), &actions);
        let mut norm_sq = 0.0;
        for ((g, &p), &e) in grad.iter_mut().zip(&occ).zip(est) {
            *g = p - e;
            norm_sq += *g * *g;
        }
        sum_sq += norm_sq;
        let eta = match config.step_rule {
            StepRule::Fixed => fixed,
            StepRule::Adaptive => adaptive_from_sum(d, sum_sq),
        };
        w.descend(&grad, eta);
        for (acc, p) in sum_occ.iter_mut().zip(&occ) {
            *acc += p;
        }
        let inv = 1.0 / t as f64;
        let l1: f64 = sum_occ.iter().zip(est).map(|(s, e)| (s * inv - e).abs()).sum();
        report.push(l1, norm_sq.sqrt(), eta, l1);
    }

    let inv = 1.0 / t_total as f64;
    let mean: Vec<f64> = sum_occ.iter().map(|s| s * inv).collect();
    let policy = policy_from_table(dims, &mean);
    report.achieved_objective = l1_distance(occupancy(mdp, &policy)?.as_slice(), est);
    Ok((policy, report))
}

/// Which globally optimal VAIL policy to return on Standard Imitation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormSelection {
    /// Lower endpoint `pi_h(a¹|s) = P̂_h(s, a¹) / rho(s)`: largest value gap.
    Worst,
    /// The expert policy.
    Best,
    /// `pi_h(a¹|s)` drawn uniformly from the optimal interval.
    Uniform(u64),
}

/// Optimal VAIL policies on Standard Imitation in closed form.
///
/// Every state marginal equals `rho`, so the objective splits per `(h, s)`:
/// any `pi_h(a¹|s)` in `[min(1, P̂_h(s, a¹)/rho(s)), 1]` is optimal. The
/// remaining mass is spread evenly over the other actions.
pub fn vail_closed_form_standard_imitation(
    mdp: &TabularMdp,
    estimate: &OccupancyEstimate,
    selection: ClosedFormSelection,
) -> Result<Policy> {
    let expert = check_standard_imitation(mdp)?;
    let dims = mdp.dims();
    dims.ensure_eq(&estimate.dims(), "estimate vs mdp")?;
    let n_a = dims.actions;
    let mut rng = match selection {
        ClosedFormSelection::Uniform(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut probs = vec![0.0; dims.len()];
    for h in 0..dims.horizon {
        for s in 0..dims.states {
            let rho = mdp.rho()[s];
            let target = estimate.at(h, s, expert);
            if rho == 0.0 && target > 0.0 {
                return Err(Error::invalid(format!(
                    "estimate puts mass {target} on state {s} at step {h}, which rho never reaches"
                )));
            }
            let lower = if rho > 0.0 { (target / rho).min(1.0) } else { 1.0 };
            let p = match selection {
                ClosedFormSelection::Worst => lower,
                ClosedFormSelection::Best => 1.0,
                ClosedFormSelection::Uniform(_) => {
                    let u: f64 = rng.as_mut().unwrap().gen();
                    lower + u * (1.0 - lower)
                }
            };
            let base = dims.idx(h, s, 0);
            let rest = if n_a > 1 { (1.0 - p) / (n_a - 1) as f64 } else { 0.0 };
            for a in 0..n_a {
                probs[base + a] = if a == expert { p } else { rest };
            }
            if n_a == 1 {
                probs[base] = 1.0;
            }
        }
    }
    Policy::from_probs(dims, probs)
}
