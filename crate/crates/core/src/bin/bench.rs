use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use tabular_imitation::harness::{render_report, run_sweep, ExperimentConfig};

#[derive(Parser)]
#[command(name = "bench", about = "Imitation-learning sweeps on tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write the CSV report.
    Sweep(SweepArgs),
}

#[derive(clap::Args)]
struct SweepArgs {
    /// `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment family: standard_imitation, reset_cliff or custom.
    #[arg(long)]
    env: Option<String>,
    /// Algorithms, comma separated.
    #[arg(long)]
    alg: Option<String>,
    /// horizon, expert_m or interactions.
    #[arg(long)]
    sweep: Option<String>,
    /// Sweep values, comma separated and increasing.
    #[arg(long)]
    values: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep(args) => sweep(args),
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::parse("")?,
    };
    let overrides = [
        ("family", &args.env),
        ("alg", &args.alg),
        ("sweep", &args.sweep),
        ("values", &args.values),
        ("m", &args.m),
        ("seeds", &args.seeds),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(0, key, v).with_context(|| format!("--{key}"))?;
        }
    }
    if let Some(out) = args.out {
        config.out = Some(out);
    }
    if config.env.states == 0 {
        bail!("environment size missing: set S, A and H in the config file");
    }
    let rows = run_sweep(&config)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let (text, summary) = render_report(&rows);
    match &config.out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            for s in &summary.slopes {
                eprintln!("{} {} slope vs {}: {:.4} ({} points)", s.env, s.alg, s.sweep_param, s.slope, s.points);
            }
        }
        None => print!("{text}"),
    }
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the error column", rows.len());
    }
    Ok(())
}
