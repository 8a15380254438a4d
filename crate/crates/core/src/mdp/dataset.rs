use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dims, Policy, TabularMdp};
use crate::error::{Error, Result};

/// One `(state, action)` pair of a trajectory.
pub type Step = (usize, usize);

/// A set of complete length-`H` trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    dims: Dims,
    trajectories: Vec<Vec<Step>>,
}

impl TrajectoryDataset {
    pub fn new(dims: Dims, trajectories: Vec<Vec<Step>>) -> Result<Self> {
        for (i, tr) in trajectories.iter().enumerate() {
            validate_trajectory(dims, i, tr)?;
        }
        Ok(TrajectoryDataset { dims, trajectories })
    }

    pub fn empty(dims: Dims) -> Self {
        TrajectoryDataset {
            dims,
            trajectories: Vec::new(),
        }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectories(&self) -> &[Vec<Step>] {
        &self.trajectories
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Step]> {
        self.trajectories.iter().map(Vec::as_slice)
    }

    pub fn push(&mut self, trajectory: Vec<Step>) -> Result<()> {
        validate_trajectory(self.dims, self.trajectories.len(), &trajectory)?;
        self.trajectories.push(trajectory);
        Ok(())
    }

    /// Sub-dataset made of the trajectories at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> TrajectoryDataset {
        TrajectoryDataset {
            dims: self.dims,
            trajectories: indices.iter().map(|&i| self.trajectories[i].clone()).collect(),
        }
    }

    /// One trajectory per line: `s a s a ... s a`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for tr in &self.trajectories {
            for (k, &(s, a)) in tr.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                write!(out, "{s} {a}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text format. Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str, dims: Dims) -> Result<Self> {
        let mut trajectories = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad integer {tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if nums.len() != 2 * dims.horizon {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!(
                        "expected {} integers for horizon {}, found {}",
                        2 * dims.horizon,
                        dims.horizon,
                        nums.len()
                    ),
                });
            }
            let tr: Vec<Step> = nums.chunks(2).map(|c| (c[0], c[1])).collect();
            validate_trajectory(dims, trajectories.len(), &tr).map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            trajectories.push(tr);
        }
        Ok(TrajectoryDataset { dims, trajectories })
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_from(path: impl AsRef<Path>, dims: Dims) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, dims)
    }
}

fn validate_trajectory(dims: Dims, index: usize, tr: &[Step]) -> Result<()> {
    if tr.len() != dims.horizon {
        return Err(Error::InvalidTrajectory {
            trajectory: index,
            message: format!("length {} differs from horizon {}", tr.len(), dims.horizon),
        });
    }
    for (h, &(s, a)) in tr.iter().enumerate() {
        if s >= dims.states || a >= dims.actions {
            return Err(Error::InvalidTrajectory {
                trajectory: index,
                message: format!("step {h}: pair ({s}, {a}) outside S={} A={}", dims.states, dims.actions),
            });
        }
    }
    Ok(())
}

/// Samples one episode of `policy` in `mdp`.
pub fn rollout<R: Rng + ?Sized>(mdp: &TabularMdp, policy: &Policy, rng: &mut R) -> Vec<Step> {
    let dims = mdp.dims();
    let mut tr = Vec::with_capacity(dims.horizon);
    let mut s = super::sample_index(mdp.rho(), rng);
    for h in 0..dims.horizon {
        let a = policy.sample_action(h, s, rng);
        tr.push((s, a));
        if h + 1 < dims.horizon {
            s = mdp.kernel().sample(h, s, a, rng);
        }
    }
    tr
}

/// Draws `m` i.i.d. trajectories; the result is a pure function of `seed`.
pub fn sample_trajectories(mdp: &TabularMdp, policy: &Policy, m: usize, seed: u64) -> Result<TrajectoryDataset> {
    mdp.dims().ensure_eq(&policy.dims(), "policy vs mdp")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectories = (0..m).map(|_| rollout(mdp, policy, &mut rng)).collect();
    Ok(TrajectoryDataset {
        dims: mdp.dims(),
        trajectories,
    })
}

/// Independent sub-stream seed for `stream` under `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
