//! Estimators of the expert's state-action distribution, behavioural cloning,
//! demonstration splitting and empirical transition models.

mod model;
mod split;

pub use model::{fit_empirical_model, EmpiricalModel};
pub use split::{enumerate_splits, split_by_indices, split_dataset, DatasetSplit};

use std::fmt;

use crate::error::{Error, Result};
use crate::mdp::{policy_from_table, Dims, OccupancyMeasure, Policy, TabularMdp, TrajectoryDataset};

/// Which estimator produced an [`OccupancyEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// Empirical frequency of `(s, a)` at each step.
    Mle,
    /// Split estimator with an exactly computed covered-prefix term.
    MimicMd,
    /// Split estimator whose covered-prefix term comes from BC rollouts.
    Mb,
    /// A true occupancy measure injected as an estimate.
    Exact,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::MimicMd => "mimic_md",
            EstimatorKind::Mb => "mb",
            EstimatorKind::Exact => "exact",
        })
    }
}

/// A nonnegative `(h, s, a)` table estimating `P^{pi_E}_h(s, a)`.
///
/// MLE and exact estimates carry unit mass per step. The split estimators add
/// two terms that are each at most one, so their per-step mass lies in `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyEstimate {
    dims: Dims,
    est: Vec<f64>,
    kind: EstimatorKind,
    degenerate: bool,
}

impl OccupancyEstimate {
    pub fn new(dims: Dims, est: Vec<f64>, kind: EstimatorKind) -> Result<Self> {
        dims.ensure_len(est.len(), "occupancy estimate")?;
        if let Some((i, &v)) = est.iter().enumerate().find(|(_, &v)| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::OutOfRange {
                what: "occupancy estimate",
                index: i,
                value: v,
            });
        }
        let out = OccupancyEstimate {
            dims,
            est,
            kind,
            degenerate: false,
        };
        for h in 0..dims.horizon {
            let mass = out.mass(h);
            let ok = match kind {
                EstimatorKind::Mle | EstimatorKind::Exact => (mass - 1.0).abs() <= 1e-10,
                EstimatorKind::MimicMd | EstimatorKind::Mb => mass <= 2.0 + 1e-10,
            };
            if !ok {
                return Err(Error::OutOfRange {
                    what: "estimate step mass",
                    index: h,
                    value: mass,
                });
            }
        }
        Ok(out)
    }

    pub fn exact(occ: &OccupancyMeasure) -> Self {
        OccupancyEstimate {
            dims: occ.dims(),
            est: occ.as_slice().to_vec(),
            kind: EstimatorKind::Exact,
            degenerate: false,
        }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.est
    }

    #[inline]
    pub fn at(&self, h: usize, s: usize, a: usize) -> f64 {
        self.est[self.dims.idx(h, s, a)]
    }

    pub fn mass(&self, h: usize) -> f64 {
        let n = self.dims.step_len();
        self.est[h * n..(h + 1) * n].iter().sum()
    }

    /// State marginal of the estimate at step `h`.
    pub fn state_marginal(&self, h: usize) -> Vec<f64> {
        crate::mdp::state_marginal(self.dims, &self.est, h)
    }

    /// Set when an input stage was empty (e.g. no rollouts), so a term is
    /// identically zero rather than estimated.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

fn count_table(dataset: &TrajectoryDataset) -> Vec<f64> {
    let dims = dataset.dims();
    let mut counts = vec![0.0; dims.len()];
    for tr in dataset.iter() {
        for (h, &(s, a)) in tr.iter().enumerate() {
            counts[dims.idx(h, s, a)] += 1.0;
        }
    }
    counts
}

/// Maximum-likelihood estimate: the fraction of trajectories at `(s, a)` in step `h`.
pub fn mle_estimate(dataset: &TrajectoryDataset) -> Result<OccupancyEstimate> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("maximum-likelihood estimate needs at least one trajectory"));
    }
    let inv = 1.0 / dataset.len() as f64;
    let est = count_table(dataset).into_iter().map(|c| c * inv).collect();
    Ok(OccupancyEstimate {
        dims: dataset.dims(),
        est,
        kind: EstimatorKind::Mle,
        degenerate: false,
    })
}

/// Output of [`bc_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct BcFit {
    pub policy: Policy,
    /// The dataset was empty and the policy is uniform everywhere.
    pub empty_dataset: bool,
}

/// Counting estimator of the expert policy: visit-count ratios on visited
/// `(h, s)`, uniform over actions elsewhere.
pub fn bc_fit(dataset: &TrajectoryDataset) -> BcFit {
    let dims = dataset.dims();
    if dataset.is_empty() {
        log::warn!("bc_fit called on an empty dataset; returning the uniform policy");
        return BcFit {
            policy: Policy::uniform(dims),
            empty_dataset: true,
        };
    }
    BcFit {
        policy: policy_from_table(dims, &count_table(dataset)),
        empty_dataset: false,
    }
}

/// Split estimator with known transitions.
///
/// The first term is the exact probability mass of expert prefixes that stay
/// inside the states visited by `D1`, computed by a forward recursion over
/// those states with the expert actions observed in `D1`. The second term is
/// the fraction of `D1c` trajectories sitting at `(s, a)` in step `h` whose
/// prefix leaves the visited sets at some step `<= h`.
pub fn mimic_md_estimate(mdp: &TabularMdp, split: &DatasetSplit) -> Result<OccupancyEstimate> {
    let dims = mdp.dims();
    dims.ensure_eq(&split.dims(), "split vs mdp")?;
    let n_s = dims.states;
    let mut est = vec![0.0; dims.len()];

    let mut covered: Vec<f64> = (0..n_s)
        .map(|s| if split.is_visited(0, s) { mdp.rho()[s] } else { 0.0 })
        .collect();
    for h in 0..dims.horizon {
        for s in 0..n_s {
            if let Some(a) = split.expert_action(h, s) {
                est[dims.idx(h, s, a)] += covered[s];
            }
        }
        if h + 1 < dims.horizon {
            let mut next = vec![0.0; n_s];
            for s in 0..n_s {
                let (Some(a), mass) = (split.expert_action(h, s), covered[s]) else {
                    continue;
                };
                if mass == 0.0 {
                    continue;
                }
                let (targets, probs) = mdp.kernel().row(h, s, a);
                for (&sp, &p) in targets.iter().zip(probs) {
                    if split.is_visited(h + 1, sp) {
                        next[sp] += mass * p;
                    }
                }
            }
            covered = next;
        }
    }

    add_uncovered_term(split, &mut est);
    Ok(OccupancyEstimate {
        dims,
        est,
        kind: EstimatorKind::MimicMd,
        degenerate: false,
    })
}

/// Split estimator without transition knowledge: the covered-prefix term is
/// the fraction of `rollouts` whose prefix stays inside the visited sets.
///
/// `rollouts` must come from a policy that plays the expert action on every
/// state visited by `D1` (e.g. `bc_fit(D1)`), so that covered prefixes have
/// the same probability as under the expert. An empty rollout set zeroes the
/// first term and marks the estimate degenerate.
pub fn mb_estimate(split: &DatasetSplit, rollouts: &TrajectoryDataset) -> Result<OccupancyEstimate> {
    let dims = split.dims();
    dims.ensure_eq(&rollouts.dims(), "rollouts vs split")?;
    let mut est = vec![0.0; dims.len()];
    let degenerate = rollouts.is_empty();
    if degenerate {
        log::warn!("mb_estimate called without rollouts; covered-prefix term is zero");
    } else {
        let inv = 1.0 / rollouts.len() as f64;
        for tr in rollouts.iter() {
            let exit = split.first_exit(tr).unwrap_or(dims.horizon);
            for (h, &(s, a)) in tr.iter().enumerate().take(exit) {
                est[dims.idx(h, s, a)] += inv;
            }
        }
    }
    add_uncovered_term(split, &mut est);
    Ok(OccupancyEstimate {
        dims,
        est,
        kind: EstimatorKind::Mb,
        degenerate,
    })
}

fn add_uncovered_term(split: &DatasetSplit, est: &mut [f64]) {
    let dims = split.dims();
    let held_out = split.d1c();
    if held_out.is_empty() {
        return;
    }
    let inv = 1.0 / held_out.len() as f64;
    for tr in held_out.iter() {
        if let Some(exit) = split.first_exit(tr) {
            for (h, &(s, a)) in tr.iter().enumerate().skip(exit) {
                est[dims.idx(h, s, a)] += inv;
            }
        }
    }
}

/// `Σ_h ‖est_h - truth_h‖₁`.
pub fn estimation_error_l1(estimate: &OccupancyEstimate, truth: &OccupancyMeasure) -> Result<f64> {
    estimate.dims().ensure_eq(&truth.dims(), "estimate vs truth")?;
    Ok(crate::mdp::l1_distance(estimate.as_slice(), truth.as_slice()))
}

/// `‖est_h - truth_h‖₁` for every step.
pub fn estimation_error_per_step(estimate: &OccupancyEstimate, truth: &OccupancyMeasure) -> Result<Vec<f64>> {
    let dims = estimate.dims();
    dims.ensure_eq(&truth.dims(), "estimate vs truth")?;
    let n = dims.step_len();
    Ok((0..dims.horizon)
        .map(|h| crate::mdp::l1_distance(&estimate.as_slice()[h * n..(h + 1) * n], truth.step(h)))
        .collect())
}
