//! The two hard-instance families and a seeded random family.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_distribution, Dims, Policy, TabularMdp, TransitionKernel};
use crate::error::{Error, Result};
use crate::kv;

/// Index used for the expert action `a¹` when the caller does not pick one.
///
/// Value iteration breaks ties toward the lowest index, so placing `a¹` last
/// keeps tie-breaking from silently favouring the expert.
pub fn default_expert_action(actions: usize) -> usize {
    actions - 1
}

/// Absorbing-state instance: every state loops to itself under every action,
/// the expert action earns 1 and all others 0.
pub fn make_standard_imitation(
    states: usize,
    actions: usize,
    horizon: usize,
    rho: Vec<f64>,
) -> Result<(TabularMdp, Policy)> {
    make_standard_imitation_with_expert(states, actions, horizon, rho, default_expert_action(actions))
}

pub fn make_standard_imitation_with_expert(
    states: usize,
    actions: usize,
    horizon: usize,
    rho: Vec<f64>,
    expert_action: usize,
) -> Result<(TabularMdp, Policy)> {
    let dims = Dims::new(states, actions, horizon)?;
    check_expert_index(dims, expert_action)?;
    let kernel = TransitionKernel::from_fn(dims, |_, s, _| vec![(s, 1.0)])?;
    let reward = (0..dims.len())
        .map(|i| if i % actions == expert_action { 1.0 } else { 0.0 })
        .collect();
    let mdp = TabularMdp::new(kernel, reward, rho)?;
    let expert = Policy::constant(dims, expert_action)?;
    Ok((mdp, expert))
}

/// `rho = (1/(m+1), …, 1/(m+1), 1 - (S-2)/(m+1), 0)`: the last good state
/// takes the bulk of the mass, the bad state none.
pub fn reset_cliff_rho(states: usize, m_param: usize) -> Result<Vec<f64>> {
    if states < 2 {
        return Err(Error::invalid("reset cliff needs at least one good and one bad state"));
    }
    let rare = states - 2;
    if m_param < rare {
        return Err(Error::invalid(format!(
            "m_param = {m_param} too small for S = {states}: need m_param >= S - 2"
        )));
    }
    let p = 1.0 / (m_param as f64 + 1.0);
    let mut rho = vec![p; rare];
    rho.push(1.0 - rare as f64 * p);
    rho.push(0.0);
    Ok(rho)
}

/// Reset Cliff: states `0..S-1` are good, `S-1` is the absorbing bad state.
/// The expert action on a good state earns 1 and redraws the next state from
/// `rho`; any other action falls into the bad state.
pub fn make_reset_cliff(states: usize, actions: usize, horizon: usize, m_param: usize) -> Result<(TabularMdp, Policy)> {
    make_reset_cliff_with_expert(states, actions, horizon, reset_cliff_rho(states, m_param)?, default_expert_action(actions))
}

/// Reset Cliff with an explicit initial distribution, which must vanish on
/// the bad state and be strictly positive on every good state.
pub fn make_reset_cliff_with_expert(
    states: usize,
    actions: usize,
    horizon: usize,
    rho: Vec<f64>,
    expert_action: usize,
) -> Result<(TabularMdp, Policy)> {
    if states < 2 {
        return Err(Error::invalid("reset cliff needs at least one good and one bad state"));
    }
    let dims = Dims::new(states, actions, horizon)?;
    check_expert_index(dims, expert_action)?;
    if rho.len() != states {
        return Err(Error::DimensionMismatch {
            what: "initial distribution",
            expected: states,
            found: rho.len(),
        });
    }
    check_distribution("initial distribution", 0, &rho)?;
    let bad = states - 1;
    if rho[bad] != 0.0 || rho[..bad].iter().any(|&p| p <= 0.0) {
        return Err(Error::invalid(
            "reset cliff rho must be positive on good states and zero on the bad state",
        ));
    }
    let reset: Vec<(usize, f64)> = rho[..bad].iter().copied().enumerate().collect();
    let kernel = TransitionKernel::from_fn(dims, |_, s, a| {
        if s == bad || a != expert_action {
            vec![(bad, 1.0)]
        } else {
            reset.clone()
        }
    })?;
    let mut reward = vec![0.0; dims.len()];
    for h in 0..horizon {
        for s in 0..bad {
            reward[dims.idx(h, s, expert_action)] = 1.0;
        }
    }
    let mdp = TabularMdp::new(kernel, reward, rho)?;
    let expert = Policy::constant(dims, expert_action)?;
    Ok((mdp, expert))
}

fn check_expert_index(dims: Dims, expert_action: usize) -> Result<()> {
    if expert_action >= dims.actions {
        return Err(Error::DimensionMismatch {
            what: "expert action",
            expected: dims.actions,
            found: expert_action,
        });
    }
    Ok(())
}

/// Verifies the absorbing structure and returns the expert action.
pub fn check_standard_imitation(mdp: &TabularMdp) -> Result<usize> {
    let dims = mdp.dims();
    let wrong = |reason: String| Error::WrongFamily {
        family: "standard imitation",
        reason,
    };
    let reward = mdp.reward();
    let expert = (0..dims.actions)
        .find(|&a| reward[dims.idx(0, 0, a)] == 1.0)
        .ok_or_else(|| wrong("no action earns reward 1 in state 0".into()))?;
    for h in 0..dims.horizon {
        for s in 0..dims.states {
            for a in 0..dims.actions {
                let (targets, probs) = mdp.kernel().row(h, s, a);
                if targets != [s] || probs != [1.0] {
                    return Err(wrong(format!("state {s} is not absorbing under action {a} at step {h}")));
                }
                let expected = if a == expert { 1.0 } else { 0.0 };
                if reward[dims.idx(h, s, a)] != expected {
                    return Err(wrong(format!("reward at ({h}, {s}, {a}) is not {expected}")));
                }
            }
        }
    }
    Ok(expert)
}

/// Good/bad partition and expert action of a Reset Cliff instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResetCliffLayout {
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
    pub expert_action: usize,
}

/// Verifies the five structural conditions of a Reset Cliff instance.
pub fn check_reset_cliff(mdp: &TabularMdp) -> Result<ResetCliffLayout> {
    let dims = mdp.dims();
    let wrong = |reason: String| Error::WrongFamily {
        family: "reset cliff",
        reason,
    };
    let kernel = mdp.kernel();
    let reward = mdp.reward();
    let self_looping = |s: usize| {
        (0..dims.horizon).all(|h| {
            (0..dims.actions).all(|a| {
                let (t, _) = kernel.row(h, s, a);
                t == [s]
            })
        })
    };
    let zero_reward = |s: usize| (0..dims.horizon).all(|h| (0..dims.actions).all(|a| reward[dims.idx(h, s, a)] == 0.0));
    let (bad, good): (Vec<usize>, Vec<usize>) = (0..dims.states).partition(|&s| self_looping(s) && zero_reward(s));
    if good.is_empty() || bad.is_empty() {
        return Err(wrong("need at least one good and one bad state".into()));
    }
    let g0 = good[0];
    let expert = (0..dims.actions)
        .find(|&a| reward[dims.idx(0, g0, a)] == 1.0)
        .ok_or_else(|| wrong(format!("no action earns reward 1 in good state {g0}")))?;
    for h in 0..dims.horizon {
        for &s in &good {
            for a in 0..dims.actions {
                let expected = if a == expert { 1.0 } else { 0.0 };
                if reward[dims.idx(h, s, a)] != expected {
                    return Err(wrong(format!("reward at ({h}, {s}, {a}) is not {expected}")));
                }
                for &sp in &good {
                    let p = kernel.prob(h, s, a, sp);
                    if a == expert && p <= 0.0 {
                        return Err(wrong(format!("expert action cannot reach good state {sp} from {s} at step {h}")));
                    }
                    if a != expert && p > 0.0 {
                        return Err(wrong(format!("non-expert action {a} reaches good state {sp} from {s} at step {h}")));
                    }
                }
            }
        }
    }
    Ok(ResetCliffLayout {
        good,
        bad,
        expert_action: expert,
    })
}

/// Dense random MDP with rewards in `[0, 1]`, drawn from `seed`.
pub fn random_mdp(dims: Dims, seed: u64) -> Result<TabularMdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let simplex = |n: usize, rng: &mut ChaCha8Rng| {
        let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect::<Vec<f64>>()
    };
    let mut dense = Vec::with_capacity(dims.len() * dims.states);
    for _ in 0..dims.len() {
        dense.extend(simplex(dims.states, &mut rng));
    }
    let reward = (0..dims.len()).map(|_| rng.gen::<f64>()).collect();
    let rho = simplex(dims.states, &mut rng);
    let kernel = TransitionKernel::from_fn(dims, |h, s, a| {
        let base = dims.idx(h, s, a) * dims.states;
        dense[base..base + dims.states].iter().copied().enumerate().collect()
    })?;
    TabularMdp::new(kernel, reward, rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvFamily {
    StandardImitation,
    ResetCliff,
    /// Random dense MDP drawn from the spec's seed; the expert is its optimal policy.
    Custom,
}

impl fmt::Display for EnvFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvFamily::StandardImitation => "standard_imitation",
            EnvFamily::ResetCliff => "reset_cliff",
            EnvFamily::Custom => "custom",
        })
    }
}

impl FromStr for EnvFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard_imitation" => Ok(EnvFamily::StandardImitation),
            "reset_cliff" => Ok(EnvFamily::ResetCliff),
            "custom" => Ok(EnvFamily::Custom),
            other => Err(Error::invalid(format!("unknown environment family {other:?}"))),
        }
    }
}

/// A built environment with its deterministic expert.
#[derive(Debug, Clone)]
pub struct Environment {
    pub family: EnvFamily,
    pub mdp: TabularMdp,
    pub expert: Policy,
}

/// Plain-text environment description (`key = value` lines).
///
/// Keys: `family`, `S`, `A`, `H`, `rho`, `m_param`, `expert_action`, `env_seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub family: EnvFamily,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub rho: Option<Vec<f64>>,
    pub m_param: Option<usize>,
    pub expert_action: Option<usize>,
    pub seed: u64,
}

impl EnvironmentSpec {
    pub fn new(family: EnvFamily, states: usize, actions: usize, horizon: usize) -> Self {
        EnvironmentSpec {
            family,
            states,
            actions,
            horizon,
            rho: None,
            m_param: None,
            expert_action: None,
            seed: 0,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = EnvironmentSpec::new(EnvFamily::StandardImitation, 0, 0, 0);
        let mut saw_family = false;
        for entry in kv::parse(text)? {
            saw_family |= entry.key == "family";
            if !spec.set(entry.line, &entry.key, &entry.value)? {
                return Err(Error::Parse {
                    line: entry.line,
                    message: format!("unknown environment key {:?}", entry.key),
                });
            }
        }
        if !saw_family {
            return Err(Error::Parse {
                line: 0,
                message: "missing `family`".into(),
            });
        }
        Ok(spec)
    }

    /// Applies one key; returns `false` if the key is not an environment key.
    pub fn set(&mut self, line: usize, key: &str, value: &str) -> Result<bool> {
        match key {
            "family" => {
                self.family = value.parse().map_err(|e: Error| Error::Parse {
                    line,
                    message: e.to_string(),
                })?
            }
            "S" | "states" => self.states = kv::parse_num(line, key, value)?,
            "A" | "actions" => self.actions = kv::parse_num(line, key, value)?,
            "H" | "horizon" => self.horizon = kv::parse_num(line, key, value)?,
            "rho" => self.rho = Some(kv::parse_list(line, key, value)?),
            "m_param" => self.m_param = Some(kv::parse_num(line, key, value)?),
            "expert_action" => self.expert_action = Some(kv::parse_num(line, key, value)?),
            "env_seed" => self.seed = kv::parse_num(line, key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "family = {}\nS = {}\nA = {}\nH = {}\n",
            self.family, self.states, self.actions, self.horizon
        );
        if let Some(rho) = &self.rho {
            let items: Vec<String> = rho.iter().map(|p| format!("{p}")).collect();
            out.push_str(&format!("rho = {}\n", items.join(", ")));
        }
        if let Some(m) = self.m_param {
            out.push_str(&format!("m_param = {m}\n"));
        }
        if let Some(a) = self.expert_action {
            out.push_str(&format!("expert_action = {a}\n"));
        }
        if self.family == EnvFamily::Custom {
            out.push_str(&format!("env_seed = {}\n", self.seed));
        }
        out
    }

    pub fn build(&self) -> Result<Environment> {
        let dims = Dims::new(self.states, self.actions, self.horizon)?;
        let expert_action = self.expert_action.unwrap_or_else(|| default_expert_action(dims.actions));
        let (mdp, expert) = match self.family {
            EnvFamily::StandardImitation => {
                let rho = self
                    .rho
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / dims.states as f64; dims.states]);
                make_standard_imitation_with_expert(dims.states, dims.actions, dims.horizon, rho, expert_action)?
            }
            EnvFamily::ResetCliff => {
                let rho = match (&self.rho, self.m_param) {
                    (Some(rho), _) => rho.clone(),
                    (None, Some(m)) => reset_cliff_rho(dims.states, m)?,
                    (None, None) => return Err(Error::invalid("reset_cliff needs `rho` or `m_param`")),
                };
                make_reset_cliff_with_expert(dims.states, dims.actions, dims.horizon, rho, expert_action)?
            }
            EnvFamily::Custom => {
                let mut mdp = random_mdp(dims, self.seed)?;
                if let Some(rho) = &self.rho {
                    mdp = TabularMdp::new(mdp.kernel().clone(), mdp.reward().to_vec(), rho.clone())?;
                }
                let (expert, _) = crate::solvers::value_iteration(&mdp, mdp.reward())?;
                (mdp, expert)
            }
        };
        Ok(Environment {
            family: self.family,
            mdp,
            expert,
        })
    }
}
