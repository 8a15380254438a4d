//! Exact representations of finite-horizon tabular MDPs.
//!
//! Time steps are zero-based throughout the crate: a horizon-`H` episode
//! visits steps `0..H`. All per-step arrays are flattened in `(h, s, a)`
//! order, see [`Dims::idx`].
//!
//! The MDP stores `H` transition kernels. The last one is validated like the
//! others but never read, because a length-`H` episode ends after the action
//! at step `H - 1`.

mod dataset;
mod envs;

pub use dataset::{derive_seed, rollout, sample_trajectories, Step, TrajectoryDataset};
pub use envs::{
    check_reset_cliff, check_standard_imitation, default_expert_action, make_reset_cliff,
    make_reset_cliff_with_expert, make_standard_imitation, make_standard_imitation_with_expert,
    random_mdp, reset_cliff_rho, EnvFamily, Environment, EnvironmentSpec, ResetCliffLayout,
};

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on probability-vector sums.
pub const PROB_TOL: f64 = 1e-12;

/// Shape of a tabular episodic problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Result<Self> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(Error::invalid(format!(
                "dimensions must be positive (S={states}, A={actions}, H={horizon})"
            )));
        }
        Ok(Dims {
            states,
            actions,
            horizon,
        })
    }

    /// Number of `(h, s, a)` entries.
    #[inline]
    pub fn len(&self) -> usize {
        self.horizon * self.states * self.actions
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of `(s, a)` entries in one time step.
    #[inline]
    pub fn step_len(&self) -> usize {
        self.states * self.actions
    }

    #[inline]
    pub fn idx(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    /// Flat index of the `(h, s)` action row.
    #[inline]
    pub fn row(&self, h: usize, s: usize) -> usize {
        h * self.states + s
    }

    pub(crate) fn ensure_eq(&self, other: &Dims, what: &'static str) -> Result<()> {
        let pairs = [
            (self.states, other.states),
            (self.actions, other.actions),
            (self.horizon, other.horizon),
        ];
        for (expected, found) in pairs {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn ensure_len(&self, len: usize, what: &'static str) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }
}

fn check_distribution(what: &'static str, index: usize, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min >= 0.0) || (sum - 1.0).abs() > PROB_TOL || !sum.is_finite() {
        return Err(Error::InvalidDistribution {
            what,
            index,
            sum,
            min,
        });
    }
    Ok(())
}

/// Non-stationary transition kernel stored as sparse rows.
///
/// Row `(h, s, a)` lists the reachable next states with their probabilities.
/// Sparse storage keeps the absorbing-state families cheap at large `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    dims: Dims,
    offsets: Vec<usize>,
    next: Vec<usize>,
    prob: Vec<f64>,
}

impl TransitionKernel {
    /// Builds a kernel row by row. Duplicate next states are merged and
    /// zero-probability entries dropped.
    pub fn from_fn<F>(dims: Dims, mut row: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> Vec<(usize, f64)>,
    {
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut next = Vec::new();
        let mut prob = Vec::new();
        offsets.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    scratch.clear();
                    scratch.extend(row(h, s, a));
                    scratch.sort_by_key(|&(sp, _)| sp);
                    let start = next.len();
                    for &(sp, p) in &scratch {
                        if sp >= dims.states {
                            return Err(Error::DimensionMismatch {
                                what: "transition target state",
                                expected: dims.states,
                                found: sp,
                            });
                        }
                        if !(p >= 0.0) || !p.is_finite() {
                            return Err(Error::OutOfRange {
                                what: "transition probability",
                                index: dims.idx(h, s, a),
                                value: p,
                            });
                        }
                        if p == 0.0 {
                            continue;
                        }
                        if next.len() > start && *next.last().unwrap() == sp {
                            *prob.last_mut().unwrap() += p;
                        } else {
                            next.push(sp);
                            prob.push(p);
                        }
                    }
                    check_distribution("transition row", dims.idx(h, s, a), &prob[start..])?;
                    offsets.push(next.len());
                }
            }
        }
        Ok(TransitionKernel {
            dims,
            offsets,
            next,
            prob,
        })
    }

    /// Builds a kernel from a dense `(h, s, a, s')` array.
    pub fn from_dense(dims: Dims, dense: &[f64]) -> Result<Self> {
        let s_count = dims.states;
        if dense.len() != dims.len() * s_count {
            return Err(Error::DimensionMismatch {
                what: "dense transition array",
                expected: dims.len() * s_count,
                found: dense.len(),
            });
        }
        Self::from_fn(dims, |h, s, a| {
            let base = dims.idx(h, s, a) * s_count;
            dense[base..base + s_count]
                .iter()
                .copied()
                .enumerate()
                .collect()
        })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Next states and their probabilities for `(h, s, a)`.
    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> (&[usize], &[f64]) {
        let i = self.dims.idx(h, s, a);
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        (&self.next[lo..hi], &self.prob[lo..hi])
    }

    pub fn prob(&self, h: usize, s: usize, a: usize, next: usize) -> f64 {
        let (targets, probs) = self.row(h, s, a);
        match targets.binary_search(&next) {
            Ok(k) => probs[k],
            Err(_) => 0.0,
        }
    }

    /// `Σ_{s'} P_h(s'|s,a) values[s']`.
    #[inline]
    pub fn expectation(&self, h: usize, s: usize, a: usize, values: &[f64]) -> f64 {
        let (targets, probs) = self.row(h, s, a);
        targets
            .iter()
            .zip(probs)
            .map(|(&sp, &p)| p * values[sp])
            .sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let s_count = self.dims.states;
        let mut dense = vec![0.0; self.dims.len() * s_count];
        for h in 0..self.dims.horizon {
            for s in 0..s_count {
                for a in 0..self.dims.actions {
                    let base = self.dims.idx(h, s, a) * s_count;
                    let (targets, probs) = self.row(h, s, a);
                    for (&sp, &p) in targets.iter().zip(probs) {
                        dense[base + sp] = p;
                    }
                }
            }
        }
        dense
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, h: usize, s: usize, a: usize, rng: &mut R) -> usize {
        let (targets, probs) = self.row(h, s, a);
        targets[sample_index(probs, rng)]
    }
}

/// Draws an index from an (approximately) normalized weight vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// A finite-horizon tabular MDP `(S, A, P, r, H, rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    dims: Dims,
    kernel: TransitionKernel,
    reward: Vec<f64>,
    rho: Vec<f64>,
}

impl TabularMdp {
    pub fn new(kernel: TransitionKernel, reward: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let dims = kernel.dims();
        dims.ensure_len(reward.len(), "reward")?;
        if let Some((i, &r)) = reward
            .iter()
            .enumerate()
            .find(|(_, &r)| !(0.0..=1.0).contains(&r))
        {
            return Err(Error::OutOfRange {
                what: "reward",
                index: i,
                value: r,
            });
        }
        if rho.len() != dims.states {
            return Err(Error::DimensionMismatch {
                what: "initial distribution",
                expected: dims.states,
                found: rho.len(),
            });
        }
        check_distribution("initial distribution", 0, &rho)?;
        Ok(TabularMdp {
            dims,
            kernel,
            reward,
            rho,
        })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    #[inline]
    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    #[inline]
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Same transitions and initial distribution with a different reward.
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self> {
        TabularMdp::new(self.kernel.clone(), reward, self.rho.clone())
    }
}

/// Non-stationary stochastic policy: one action distribution per `(h, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    dims: Dims,
    probs: Vec<f64>,
    deterministic: bool,
}

impl Policy {
    pub fn uniform(dims: Dims) -> Self {
        let p = 1.0 / dims.actions as f64;
        Policy {
            dims,
            probs: vec![p; dims.len()],
            deterministic: dims.actions == 1,
        }
    }

    /// Deterministic policy from one action per `(h, s)` row.
    pub fn from_actions(dims: Dims, actions: &[usize]) -> Result<Self> {
        if actions.len() != dims.horizon * dims.states {
            return Err(Error::DimensionMismatch {
                what: "deterministic action table",
                expected: dims.horizon * dims.states,
                found: actions.len(),
            });
        }
        let mut probs = vec![0.0; dims.len()];
        for (row, &a) in actions.iter().enumerate() {
            if a >= dims.actions {
                return Err(Error::DimensionMismatch {
                    what: "action",
                    expected: dims.actions,
                    found: a,
                });
            }
            probs[row * dims.actions + a] = 1.0;
        }
        Ok(Policy {
            dims,
            probs,
            deterministic: true,
        })
    }

    pub fn constant(dims: Dims, action: usize) -> Result<Self> {
        Policy::from_actions(dims, &vec![action; dims.horizon * dims.states])
    }

    pub fn from_probs(dims: Dims, probs: Vec<f64>) -> Result<Self> {
        dims.ensure_len(probs.len(), "policy table")?;
        let mut deterministic = true;
        for (row, chunk) in probs.chunks(dims.actions).enumerate() {
            check_distribution("policy row", row, chunk)?;
            deterministic &= chunk.iter().all(|&p| p == 0.0 || p == 1.0);
        }
        Ok(Policy {
            dims,
            probs,
            deterministic,
        })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.dims.row(h, s) * self.dims.actions;
        &self.probs[start..start + self.dims.actions]
    }

    #[inline]
    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs[self.dims.idx(h, s, a)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The chosen action when the row at `(h, s)` is one-hot.
    pub fn action(&self, h: usize, s: usize) -> Option<usize> {
        let row = self.row(h, s);
        row.iter().position(|&p| p == 1.0)
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, h: usize, s: usize, rng: &mut R) -> usize {
        sample_index(self.row(h, s), rng)
    }
}

/// Per-step state-action visitation distribution `P^pi_h(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    dims: Dims,
    dist: Vec<f64>,
}

impl OccupancyMeasure {
    /// Wraps a raw table; each step must carry unit mass.
    pub fn from_vec(dims: Dims, dist: Vec<f64>) -> Result<Self> {
        dims.ensure_len(dist.len(), "occupancy table")?;
        for (h, step) in dist.chunks(dims.step_len()).enumerate() {
            let sum: f64 = step.iter().sum();
            let min = step.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min >= 0.0) || (sum - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidDistribution {
                    what: "occupancy step",
                    index: h,
                    sum,
                    min,
                });
            }
        }
        Ok(OccupancyMeasure { dims, dist })
    }

    pub(crate) fn from_vec_unchecked(dims: Dims, dist: Vec<f64>) -> Self {
        OccupancyMeasure { dims, dist }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn at(&self, h: usize, s: usize, a: usize) -> f64 {
        self.dist[self.dims.idx(h, s, a)]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.dist
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.dist
    }

    /// The `(s, a)` table of step `h`.
    pub fn step(&self, h: usize) -> &[f64] {
        let n = self.dims.step_len();
        &self.dist[h * n..(h + 1) * n]
    }

    /// State marginal `P^pi_h(s)`.
    pub fn state_marginal(&self, h: usize) -> Vec<f64> {
        state_marginal(self.dims, &self.dist, h)
    }

    pub fn mass(&self, h: usize) -> f64 {
        self.step(h).iter().sum()
    }
}

pub(crate) fn state_marginal(dims: Dims, table: &[f64], h: usize) -> Vec<f64> {
    (0..dims.states)
        .map(|s| {
            let i = dims.idx(h, s, 0);
            table[i..i + dims.actions].iter().sum()
        })
        .collect()
}

/// Pushes a step-`h` state-action distribution through `P_h`.
pub fn push_forward(kernel: &TransitionKernel, h: usize, step_dist: &[f64]) -> Vec<f64> {
    let dims = kernel.dims();
    let mut next = vec![0.0; dims.states];
    for s in 0..dims.states {
        for a in 0..dims.actions {
            let mass = step_dist[s * dims.actions + a];
            if mass == 0.0 {
                continue;
            }
            let (targets, probs) = kernel.row(h, s, a);
            for (&sp, &p) in targets.iter().zip(probs) {
                next[sp] += mass * p;
            }
        }
    }
    next
}

/// Exact occupancy measure by the forward flow recursion
/// `P_{h+1}(s') = Σ_{s,a} P_h(s) pi_h(a|s) P_h(s'|s,a)`.
pub fn occupancy(mdp: &TabularMdp, policy: &Policy) -> Result<OccupancyMeasure> {
    mdp.dims().ensure_eq(&policy.dims(), "policy vs mdp")?;
    Ok(occupancy_with_rho(mdp.kernel(), mdp.rho(), policy))
}

pub(crate) fn occupancy_with_rho(kernel: &TransitionKernel, rho: &[f64], policy: &Policy) -> OccupancyMeasure {
    let dims = kernel.dims();
    let (n_s, n_a) = (dims.states, dims.actions);
    let mut dist = vec![0.0; dims.len()];
    let mut marginal = rho.to_vec();
    for h in 0..dims.horizon {
        let base = h * dims.step_len();
        for s in 0..n_s {
            let m = marginal[s];
            if m == 0.0 {
                continue;
            }
            let row = policy.row(h, s);
            for a in 0..n_a {
                dist[base + s * n_a + a] = m * row[a];
            }
        }
        if h + 1 < dims.horizon {
            marginal = push_forward(kernel, h, &dist[base..base + dims.step_len()]);
        }
    }
    OccupancyMeasure::from_vec_unchecked(dims, dist)
}

/// Occupancy table of the deterministic policy `actions[h * S + s]`.
pub(crate) fn occupancy_of_actions(kernel: &TransitionKernel, rho: &[f64], actions: &[usize]) -> Vec<f64> {
    let dims = kernel.dims();
    let (n_s, n_a) = (dims.states, dims.actions);
    let mut dist = vec![0.0; dims.len()];
    let mut marginal = rho.to_vec();
    for h in 0..dims.horizon {
        let base = h * dims.step_len();
        let mut next = vec![0.0; if h + 1 < dims.horizon { n_s } else { 0 }];
        for (s, &m) in marginal.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let a = actions[h * n_s + s];
            dist[base + s * n_a + a] = m;
            if h + 1 < dims.horizon {
                let (targets, probs) = kernel.row(h, s, a);
                for (&sp, &p) in targets.iter().zip(probs) {
                    next[sp] += m * p;
                }
            }
        }
        marginal = next;
    }
    dist
}

/// `V^pi = Σ_h Σ_{s,a} P^pi_h(s,a) r_h(s,a)`.
///
/// `reward_override` may hold adversarial rewards in `[-1, 1]`.
pub fn policy_value(mdp: &TabularMdp, policy: &Policy, reward_override: Option<&[f64]>) -> Result<f64> {
    let reward = match reward_override {
        Some(r) => {
            mdp.dims().ensure_len(r.len(), "reward override")?;
            if let Some((i, &v)) = r.iter().enumerate().find(|(_, &v)| !(-1.0..=1.0).contains(&v)) {
                return Err(Error::OutOfRange {
                    what: "reward override",
                    index: i,
                    value: v,
                });
            }
            r
        }
        None => mdp.reward(),
    };
    let occ = occupancy(mdp, policy)?;
    Ok(dot(occ.as_slice(), reward))
}

/// Recovers the policy that induces `occ`: `pi_h(a|s) = occ_h(s,a) / occ_h(s)`,
/// uniform where the state carries no mass.
pub fn policy_from_occupancy(occ: &OccupancyMeasure) -> Policy {
    policy_from_table(occ.dims(), occ.as_slice())
}

pub(crate) fn policy_from_table(dims: Dims, table: &[f64]) -> Policy {
    let n_a = dims.actions;
    let uniform = 1.0 / n_a as f64;
    let mut probs = vec![0.0; dims.len()];
    for (row, (out, src)) in probs.chunks_mut(n_a).zip(table.chunks(n_a)).enumerate() {
        let mass: f64 = src.iter().sum();
        if mass > 0.0 {
            for (o, &v) in out.iter_mut().zip(src) {
                *o = v / mass;
            }
        } else {
            out.fill(uniform);
        }
        debug_assert!(row < dims.horizon * dims.states);
    }
    let deterministic = probs.iter().all(|&p| p == 0.0 || p == 1.0);
    Policy {
        dims,
        probs,
        deterministic,
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ |a_i - b_i|` over flattened tables.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
