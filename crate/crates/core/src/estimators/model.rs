use crate::error::Result;
use crate::mdp::{Dims, Step, TabularMdp, TransitionKernel, TrajectoryDataset};

/// Count-based transition model of an MDP learned from reward-free episodes.
///
/// Rows with no observed transition fall back to the uniform distribution
/// over next states; the initial distribution is the empirical frequency of
/// first states (uniform before any episode).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    dims: Dims,
    /// Visits of `(h, s, a)` over all `H` steps.
    visits: Vec<u64>,
    /// `transitions[idx(h, s, a) * S + s']` for `h < H - 1`.
    transitions: Vec<u64>,
    initial: Vec<u64>,
    episodes: u64,
}

impl EmpiricalModel {
    pub fn new(dims: Dims) -> Self {
        EmpiricalModel {
            dims,
            visits: vec![0; dims.len()],
            transitions: vec![0; dims.len() * dims.states],
            initial: vec![0; dims.states],
            episodes: 0,
        }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Records one complete episode.
    pub fn observe(&mut self, tr: &[Step]) {
        let dims = self.dims;
        debug_assert_eq!(tr.len(), dims.horizon);
        self.episodes += 1;
        self.initial[tr[0].0] += 1;
        for (h, &(s, a)) in tr.iter().enumerate() {
            let i = dims.idx(h, s, a);
            self.visits[i] += 1;
            if let Some(&(sp, _)) = tr.get(h + 1) {
                self.transitions[i * dims.states + sp] += 1;
            }
        }
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Total number of recorded `(h, s, a)` visits, i.e. `episodes * H`.
    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }

    #[inline]
    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[self.dims.idx(h, s, a)]
    }

    /// Raw next-state counts of `(h, s, a)`.
    #[inline]
    pub fn transition_counts(&self, h: usize, s: usize, a: usize) -> &[u64] {
        let i = self.dims.idx(h, s, a) * self.dims.states;
        &self.transitions[i..i + self.dims.states]
    }

    /// Estimated `P_h(. | s, a)`.
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> Vec<f64> {
        let counts = self.transition_counts(h, s, a);
        let total: u64 = counts.iter().sum();
        if total == 0 {
            vec![1.0 / self.dims.states as f64; self.dims.states]
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        }
    }

    /// `Σ_{s'} P̂_h(s'|s,a) values[s']`, without allocating.
    pub fn expectation(&self, h: usize, s: usize, a: usize, values: &[f64]) -> f64 {
        let counts = self.transition_counts(h, s, a);
        let total: u64 = counts.iter().sum();
        if total == 0 {
            values.iter().sum::<f64>() / self.dims.states as f64
        } else {
            counts.iter().zip(values).map(|(&c, &v)| c as f64 * v).sum::<f64>() / total as f64
        }
    }

    pub fn rho_hat(&self) -> Vec<f64> {
        if self.episodes == 0 {
            return vec![1.0 / self.dims.states as f64; self.dims.states];
        }
        let n = self.episodes as f64;
        self.initial.iter().map(|&c| c as f64 / n).collect()
    }

    /// The estimated MDP with rewards set to zero.
    pub fn to_mdp(&self) -> Result<TabularMdp> {
        let dims = self.dims;
        let kernel = TransitionKernel::from_fn(dims, |h, s, a| {
            if h + 1 >= dims.horizon {
                return vec![(s, 1.0)];
            }
            self.transition_row(h, s, a)
                .into_iter()
                .enumerate()
                .filter(|&(_, p)| p > 0.0)
                .collect()
        })?;
        TabularMdp::new(kernel, vec![0.0; dims.len()], self.rho_hat())
    }

    /// Largest `‖P̂_h(.|s,a) - P_h(.|s,a)‖₁` over `h < H - 1` and all `(s, a)`.
    pub fn max_row_error(&self, truth: &TabularMdp) -> Result<f64> {
        let dims = self.dims;
        dims.ensure_eq(&truth.dims(), "model vs truth")?;
        let mut worst: f64 = 0.0;
        for h in 0..dims.horizon.saturating_sub(1) {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    let row = self.transition_row(h, s, a);
                    let err: f64 = (0..dims.states).map(|sp| (row[sp] - truth.kernel().prob(h, s, a, sp)).abs()).sum();
                    worst = worst.max(err);
                }
            }
        }
        Ok(worst)
    }
}

/// Fits an [`EmpiricalModel`] to a set of reward-free episodes.
pub fn fit_empirical_model(interactions: &TrajectoryDataset) -> EmpiricalModel {
    let mut model = EmpiricalModel::new(interactions.dims());
    for tr in interactions.iter() {
        model.observe(tr);
    }
    model
}
