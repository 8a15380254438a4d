//! Sweeps over horizon, expert sample size or interaction budget, with exact
//! gap evaluation, multi-seed aggregation and log-log slope fits.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{bc_fit, mimic_md_estimate, mle_estimate, split_dataset};
use crate::exploration::{mb_tail, oal_solve, InteractionBudget, MbTailOracles, OalConfig};
use crate::kv;
use crate::mdp::{derive_seed, policy_value, sample_trajectories, EnvFamily, EnvironmentSpec, Policy};
use crate::solvers::{
    fem_solve, gail_solve, gtal_solve, ogd_saddle_solve, vail_closed_form_standard_imitation, ClosedFormSelection,
    SaddleConfig, StepRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Bc,
    Vail,
    Tail,
    /// Worst-case closed-form optimum for the split estimate on Standard Imitation.
    MimicMdExact,
    Fem,
    Gtal,
    Gail,
    Oal,
    MbTail,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::Bc,
        Algorithm::Vail,
        Algorithm::Tail,
        Algorithm::MimicMdExact,
        Algorithm::Fem,
        Algorithm::Gtal,
        Algorithm::Gail,
        Algorithm::Oal,
        Algorithm::MbTail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bc => "bc",
            Algorithm::Vail => "vail",
            Algorithm::Tail => "tail",
            Algorithm::MimicMdExact => "mimic_md_exact",
            Algorithm::Fem => "fem",
            Algorithm::Gtal => "gtal",
            Algorithm::Gail => "gail",
            Algorithm::Oal => "oal",
            Algorithm::MbTail => "mb_tail",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepAxis {
    Horizon,
    ExpertM,
    Interactions,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Horizon => "horizon",
            SweepAxis::ExpertM => "expert_m",
            SweepAxis::Interactions => "interactions",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizon" | "H" => Ok(SweepAxis::Horizon),
            "expert_m" | "m" => Ok(SweepAxis::ExpertM),
            "interactions" => Ok(SweepAxis::Interactions),
            other => Err(Error::invalid(format!("unknown sweep axis {other:?}"))),
        }
    }
}

/// A full sweep description.
///
/// Config files are `key = value` lines. Besides the environment keys of
/// [`EnvironmentSpec`] they accept `alg` (one or more names), `sweep`,
/// `values`, `m`, `T`, `step_rule`, `gail_eta`, `interactions`, `seeds`,
/// `base_seed`, `out` and `timing`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvironmentSpec,
    pub algorithms: Vec<Algorithm>,
    pub sweep: SweepAxis,
    pub values: Vec<usize>,
    /// Expert trajectories per cell when `m` is not swept.
    pub m: Option<usize>,
    /// Solver iterations; the per-task defaults apply when unset.
    pub iterations: Option<usize>,
    pub step_rule: StepRule,
    pub gail_eta: f64,
    /// Total interaction episodes when the budget is not swept.
    pub interactions: Option<usize>,
    pub seeds: usize,
    pub base_seed: u64,
    pub out: Option<PathBuf>,
    /// Fill `runtime_ms`. Off by default so reports stay byte-stable.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(env: EnvironmentSpec, algorithms: Vec<Algorithm>, sweep: SweepAxis, values: Vec<usize>) -> Self {
        ExperimentConfig {
            env,
            algorithms,
            sweep,
            values,
            m: None,
            iterations: None,
            step_rule: StepRule::Adaptive,
            gail_eta: 1.0,
            interactions: None,
            seeds: 1,
            base_seed: 0,
            out: None,
            timing: false,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::new(
            EnvironmentSpec::new(EnvFamily::StandardImitation, 0, 0, 0),
            Vec::new(),
            SweepAxis::ExpertM,
            Vec::new(),
        );
        for entry in kv::parse(text)? {
            cfg.set(entry.line, &entry.key, &entry.value)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies one `key = value` setting; `line` is only used in errors.
    pub fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let parse_err = |e: Error| Error::Parse {
            line,
            message: e.to_string(),
        };
        match key {
            "alg" | "algs" | "algorithms" => {
                self.algorithms = value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<Algorithm>().map_err(parse_err))
                    .collect::<Result<_>>()?
            }
            "sweep" => self.sweep = value.parse().map_err(parse_err)?,
            "values" => self.values = kv::parse_list(line, key, value)?,
            "m" => self.m = Some(kv::parse_num(line, key, value)?),
            "T" | "iterations" => self.iterations = Some(kv::parse_num(line, key, value)?),
            "step_rule" => {
                self.step_rule = match value {
                    "adaptive" => StepRule::Adaptive,
                    "fixed" => StepRule::Fixed,
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("unknown step rule {other:?}"),
                        })
                    }
                }
            }
            "gail_eta" => self.gail_eta = kv::parse_num(line, key, value)?,
            "interactions" => self.interactions = Some(kv::parse_num(line, key, value)?),
            "seeds" => self.seeds = kv::parse_num(line, key, value)?,
            "base_seed" => self.base_seed = kv::parse_num(line, key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "timing" => self.timing = kv::parse_num(line, key, value)?,
            _ => {
                if !self.env.set(line, key, value)? {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key {key:?}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::invalid("no algorithm selected"));
        }
        if self.values.is_empty() {
            return Err(Error::invalid("no sweep values"));
        }
        if self.values[0] == 0 || self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sweep values must be positive and strictly increasing"));
        }
        if self.seeds == 0 {
            return Err(Error::invalid("seeds must be at least 1"));
        }
        if self.sweep != SweepAxis::ExpertM && self.m.is_none() {
            return Err(Error::invalid("`m` is required unless the sweep is over expert_m"));
        }
        if self.iterations == Some(0) {
            return Err(Error::invalid("T must be positive"));
        }
        Ok(())
    }

    /// Iteration budget for `alg` at horizon `h`.
    pub fn iterations_for(&self, alg: Algorithm, h: usize) -> usize {
        if let Some(t) = self.iterations {
            return t;
        }
        match (self.env.family, self.sweep) {
            (EnvFamily::StandardImitation, SweepAxis::Horizon) => 500,
            (EnvFamily::StandardImitation, SweepAxis::ExpertM) => 8000,
            (EnvFamily::ResetCliff, SweepAxis::Horizon) => match alg {
                Algorithm::Fem => 300,
                Algorithm::Tail => h,
                _ => 4 * h,
            },
            (EnvFamily::ResetCliff, SweepAxis::ExpertM) => 20000,
            _ => 5000,
        }
    }
}

/// One `(algorithm, sweep value, seed)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub env: EnvFamily,
    pub alg: Algorithm,
    pub sweep_param: SweepAxis,
    pub sweep_value: usize,
    pub seed: usize,
    pub m: usize,
    /// Interaction episodes used: `n_estimator + n_exploration`, or OAL's online episodes.
    pub n: usize,
    pub n_estimator: usize,
    pub n_exploration: usize,
    /// `V^{pi_E} - V^pi` under the true model; `NaN` on error rows.
    pub gap: f64,
    pub expert_value: f64,
    pub runtime_ms: Option<u128>,
    pub error: Option<String>,
}

pub const ROW_HEADER: &str =
    "env,alg,sweep_param,sweep_value,seed,m,n,n_estimator,n_exploration,gap,expert_value,runtime_ms,error";

impl ResultRow {
    fn to_csv(&self, out: &mut String) {
        let num = |v: f64| if v.is_nan() { String::new() } else { v.to_string() };
        let runtime = self.runtime_ms.map(|t| t.to_string()).unwrap_or_default();
        let error = self
            .error
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n', '\r'], ";");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.env,
            self.alg,
            self.sweep_param,
            self.sweep_value,
            self.seed,
            self.m,
            self.n,
            self.n_estimator,
            self.n_exploration,
            num(self.gap),
            num(self.expert_value),
            runtime,
            error
        )
        .unwrap();
    }
}

struct Cell {
    alg: Algorithm,
    value: usize,
    seed: usize,
}

/// Runs every cell in parallel; rows come back in `(algorithm, value, seed)`
/// order regardless of scheduling.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_sweep_with(config, true)
}

pub fn run_sweep_with(config: &ExperimentConfig, parallel: bool) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let cells: Vec<Cell> = config
        .algorithms
        .iter()
        .flat_map(|&alg| {
            config
                .values
                .iter()
                .flat_map(move |&value| (0..config.seeds).map(move |seed| Cell { alg, value, seed }))
        })
        .collect();
    let rows = if parallel {
        cells.par_iter().map(|c| run_cell(config, c)).collect()
    } else {
        cells.iter().map(|c| run_cell(config, c)).collect()
    };
    Ok(rows)
}

/// Seed of a cell. It does not depend on the algorithm, so every algorithm
/// sees the same expert data at a given `(value, seed)`.
pub fn cell_seed(base: u64, value: usize, seed: usize) -> u64 {
    derive_seed(derive_seed(base, value as u64), seed as u64)
}

fn run_cell(config: &ExperimentConfig, cell: &Cell) -> ResultRow {
    let mut env = config.env.clone();
    let mut m = config.m.unwrap_or(0);
    let mut interactions = config.interactions.unwrap_or(0);
    match config.sweep {
        SweepAxis::Horizon => env.horizon = cell.value,
        SweepAxis::ExpertM => m = cell.value,
        SweepAxis::Interactions => interactions = cell.value,
    }
    if env.family == EnvFamily::ResetCliff && env.rho.is_none() && env.m_param.is_none() {
        env.m_param = Some(m);
    }
    let mut row = ResultRow {
        env: env.family,
        alg: cell.alg,
        sweep_param: config.sweep,
        sweep_value: cell.value,
        seed: cell.seed,
        m,
        n: 0,
        n_estimator: 0,
        n_exploration: 0,
        gap: f64::NAN,
        expert_value: f64::NAN,
        runtime_ms: None,
        error: None,
    };
    let start = Instant::now();
    let seed = cell_seed(config.base_seed, cell.value, cell.seed);
    match evaluate_cell(config, &env, cell.alg, m, interactions, seed, &mut row) {
        Ok(()) => {}
        Err(e) => {
            log::warn!("cell {} {}={} seed {} failed: {e}", cell.alg, config.sweep, cell.value, cell.seed);
            row.error = Some(error_chain(&e));
        }
    }
    if config.timing {
        row.runtime_ms = Some(start.elapsed().as_millis());
    }
    row
}

fn error_chain(e: &Error) -> String {
    let mut msg = e.to_string();
    let mut src = std::error::Error::source(e);
    while let Some(inner) = src {
        msg.push_str(": ");
        msg.push_str(&inner.to_string());
        src = inner.source();
    }
    msg
}

fn evaluate_cell(
    config: &ExperimentConfig,
    spec: &EnvironmentSpec,
    alg: Algorithm,
    m: usize,
    interactions: usize,
    seed: u64,
    row: &mut ResultRow,
) -> Result<()> {
    let env = spec.build().map_err(|e| e.in_stage("environment"))?;
    let mdp = &env.mdp;
    let data = sample_trajectories(mdp, &env.expert, m, derive_seed(seed, 0)).map_err(|e| e.in_stage("expert data"))?;
    let iterations = config.iterations_for(alg, spec.horizon);
    let saddle = SaddleConfig::new(iterations, config.step_rule);
    let tail_split = || split_dataset(&data, derive_seed(seed, 1)).map_err(|e| e.in_stage("split"));

    let policy: Policy = match alg {
        Algorithm::Bc => bc_fit(&data).policy,
        Algorithm::Vail => ogd_saddle_solve(mdp, &mle_estimate(&data)?, &saddle)?.0,
        Algorithm::Tail => ogd_saddle_solve(mdp, &mimic_md_estimate(mdp, &tail_split()?)?, &saddle)?.0,
        Algorithm::MimicMdExact => {
            let est = mimic_md_estimate(mdp, &tail_split()?)?;
            vail_closed_form_standard_imitation(mdp, &est, ClosedFormSelection::Worst)?
        }
        Algorithm::Fem => fem_solve(mdp, &mle_estimate(&data)?, iterations)?.0,
        Algorithm::Gtal => gtal_solve(mdp, &mle_estimate(&data)?, iterations)?.0,
        Algorithm::Gail => gail_solve(mdp, &mle_estimate(&data)?, iterations, config.gail_eta)?.0,
        Algorithm::Oal => {
            row.n = interactions;
            oal_solve(mdp, &data, &OalConfig::new(interactions, derive_seed(seed, 2)))?
        }
        Algorithm::MbTail => {
            let budget = InteractionBudget::split_evenly(m, interactions);
            row.n_estimator = budget.estimator_rollouts;
            row.n_exploration = budget.exploration_episodes;
            row.n = interactions;
            mb_tail(mdp, &data, &budget, &saddle, derive_seed(seed, 3), &MbTailOracles::default())?.policy
        }
    };
    let expert_value = policy_value(mdp, &env.expert, None)?;
    let mut gap = expert_value - policy_value(mdp, &policy, None)?;
    if (-1e-9..0.0).contains(&gap) {
        gap = 0.0;
    }
    row.expert_value = expert_value;
    row.gap = gap;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`. Points with a nonpositive
/// coordinate are dropped with a warning.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| {
            let ok = x > 0.0 && y > 0.0;
            if !ok {
                log::warn!("dropping nonpositive point ({x}, {y}) from log-log fit");
            }
            ok
        })
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if kept.len() < 2 {
        return Err(Error::invalid(format!(
            "log-log fit needs at least two positive points, got {}",
            kept.len()
        )));
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("log-log fit needs at least two distinct x values"));
    }
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Per `(env, alg, sweep value)` statistics over successful seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub env: EnvFamily,
    pub alg: Algorithm,
    pub sweep_param: SweepAxis,
    pub sweep_value: usize,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (zero for a single seed).
    pub std: f64,
    /// Standard error of the mean.
    pub sem: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub env: EnvFamily,
    pub alg: Algorithm,
    pub sweep_param: SweepAxis,
    /// `NaN` when fewer than two positive means were available.
    pub slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportSummary {
    pub aggregates: Vec<AggregateRow>,
    pub slopes: Vec<SlopeRow>,
}

impl ReportSummary {
    pub fn slope(&self, alg: Algorithm) -> Option<f64> {
        self.slopes.iter().find(|s| s.alg == alg).map(|s| s.slope)
    }

    pub fn means(&self, alg: Algorithm) -> Vec<(usize, f64)> {
        self.aggregates
            .iter()
            .filter(|a| a.alg == alg)
            .map(|a| (a.sweep_value, a.mean))
            .collect()
    }
}

pub fn summarize(rows: &[ResultRow]) -> ReportSummary {
    type Key = (EnvFamily, Algorithm, SweepAxis);
    let mut groups: BTreeMap<(Key, usize), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        groups
            .entry(((r.env, r.alg, r.sweep_param), r.sweep_value))
            .or_default()
            .push(r.gap);
    }
    let mut summary = ReportSummary::default();
    let mut curves: BTreeMap<Key, Vec<(f64, f64)>> = BTreeMap::new();
    for (((env, alg, sweep_param), sweep_value), gaps) in groups {
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let std = if gaps.len() > 1 {
            (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        summary.aggregates.push(AggregateRow {
            env,
            alg,
            sweep_param,
            sweep_value,
            count: gaps.len(),
            mean,
            std,
            sem: std / n.sqrt(),
        });
        curves.entry((env, alg, sweep_param)).or_default().push((sweep_value as f64, mean));
    }
    for ((env, alg, sweep_param), points) in curves {
        let slope = loglog_slope(&points).unwrap_or(f64::NAN);
        summary.slopes.push(SlopeRow {
            env,
            alg,
            sweep_param,
            slope,
            points: points.len(),
        });
    }
    summary
}

/// CSV text of a report: the row block, then (for nonempty input) an
/// aggregate block and a slope block, each with its own header and
/// separated by a blank line.
pub fn render_report(rows: &[ResultRow]) -> (String, ReportSummary) {
    let mut out = String::from(ROW_HEADER);
    out.push('\n');
    if rows.is_empty() {
        return (out, ReportSummary::default());
    }
    for r in rows {
        r.to_csv(&mut out);
    }
    let summary = summarize(rows);
    out.push_str("\nenv,alg,sweep_param,sweep_value,count,mean_gap,std_gap,sem_gap\n");
    for a in &summary.aggregates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            a.env, a.alg, a.sweep_param, a.sweep_value, a.count, a.mean, a.std, a.sem
        )
        .unwrap();
    }
    out.push_str("\nenv,alg,sweep_param,slope,points\n");
    for s in &summary.slopes {
        writeln!(out, "{},{},{},{},{}", s.env, s.alg, s.sweep_param, s.slope, s.points).unwrap();
    }
    (out, summary)
}

/// Writes [`render_report`] to `out`.
pub fn emit_report(rows: &[ResultRow], out: impl AsRef<Path>) -> Result<ReportSummary> {
    let (text, summary) = render_report(rows);
    std::fs::write(out, text)?;
    Ok(summary)
}

#[cfg(test)]
mod tests;
