use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{Dims, Step, TrajectoryDataset};

/// A demonstration set split into halves `D1` and `D1c`, together with the
/// per-step visited states of `D1` and the expert action recorded there.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    d1: TrajectoryDataset,
    d1c: TrajectoryDataset,
    /// `expert[h * S + s]`, `Some` exactly on states visited by `D1` at step `h`.
    expert: Vec<Option<usize>>,
}

impl DatasetSplit {
    /// Builds a split from explicit halves. Fails if `D1` shows two different
    /// actions at the same `(h, s)`, since the expert must be deterministic.
    pub fn from_parts(d1: TrajectoryDataset, d1c: TrajectoryDataset) -> Result<Self> {
        let dims = d1.dims();
        dims.ensure_eq(&d1c.dims(), "D1 vs D1c")?;
        let mut expert = vec![None; dims.horizon * dims.states];
        for tr in d1.iter() {
            for (h, &(s, a)) in tr.iter().enumerate() {
                let slot = &mut expert[h * dims.states + s];
                match *slot {
                    None => *slot = Some(a),
                    Some(b) if b != a => {
                        return Err(Error::ConflictingExpertAction {
                            step: h,
                            state: s,
                            first: b,
                            second: a,
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(DatasetSplit { d1, d1c, expert })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.d1.dims()
    }

    pub fn d1(&self) -> &TrajectoryDataset {
        &self.d1
    }

    pub fn d1c(&self) -> &TrajectoryDataset {
        &self.d1c
    }

    #[inline]
    pub fn is_visited(&self, h: usize, s: usize) -> bool {
        self.expert[h * self.dims().states + s].is_some()
    }

    /// Action taken by `D1` at `(h, s)`, if `s` was visited at step `h`.
    #[inline]
    pub fn expert_action(&self, h: usize, s: usize) -> Option<usize> {
        self.expert[h * self.dims().states + s]
    }

    /// First step at which `tr` sits on a state not visited by `D1`.
    ///
    /// `None` means the whole trajectory stays inside the visited sets.
    pub fn first_exit(&self, tr: &[Step]) -> Option<usize> {
        tr.iter().enumerate().position(|(h, &(s, _))| !self.is_visited(h, s))
    }

    /// Whether the prefix of `tr` up to step `h` stays inside the visited sets.
    pub fn prefix_covered(&self, tr: &[Step], h: usize) -> bool {
        self.first_exit(tr).map_or(true, |exit| exit > h)
    }
}

/// Uniformly random split into two equal halves.
///
/// When `|D|` is odd one uniformly chosen trajectory is dropped first. The
/// result depends only on the dataset and `seed`.
pub fn split_dataset(dataset: &TrajectoryDataset, seed: u64) -> Result<DatasetSplit> {
    if dataset.len() < 2 {
        return Err(Error::EmptyDataset("splitting needs at least two trajectories"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    if indices.len() % 2 == 1 {
        let drop = rng.gen_range(0..indices.len());
        log::debug!("odd dataset size {}; dropping trajectory {drop}", dataset.len());
        indices.remove(drop);
    }
    indices.shuffle(&mut rng);
    let half = indices.len() / 2;
    DatasetSplit::from_parts(dataset.select(&indices[..half]), dataset.select(&indices[half..]))
}

/// Split whose `D1` holds the trajectories at `d1_indices` and whose `D1c`
/// holds all the others, in dataset order.
pub fn split_by_indices(dataset: &TrajectoryDataset, d1_indices: &[usize]) -> Result<DatasetSplit> {
    let mut in_d1 = vec![false; dataset.len()];
    for &i in d1_indices {
        if i >= dataset.len() {
            return Err(Error::OutOfRange {
                what: "split index",
                index: i,
                value: i as f64,
            });
        }
        in_d1[i] = true;
    }
    let d1c: Vec<usize> = (0..dataset.len()).filter(|&i| !in_d1[i]).collect();
    DatasetSplit::from_parts(dataset.select(d1_indices), dataset.select(&d1c))
}

/// Every equal-size split of an even-size dataset, `C(m, m/2)` in total, in
/// lexicographic order of the `D1` index sets.
pub fn enumerate_splits(dataset: &TrajectoryDataset) -> Result<impl Iterator<Item = Result<DatasetSplit>> + '_> {
    let m = dataset.len();
    if m < 2 || m % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "enumerating splits needs an even, nonzero dataset size; got {m}"
        )));
    }
    Ok(Combinations::new(m, m / 2).map(move |idx| split_by_indices(dataset, &idx)))
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let cur = self.current.as_mut().unwrap();
        match (0..k).rev().find(|&i| cur[i] < self.n - k + i) {
            Some(i) => {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
            }
            None => self.current = None,
        }
        Some(out)
    }
}
