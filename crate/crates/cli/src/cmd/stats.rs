use std::path::PathBuf;

use clap::{Args, Subcommand};
use clvr_core::stats::{histogram, nfe, normal_ci, se_binomial, speedup, wilson_interval, NfeConfig};
use clvr_core::trajectory::parse_trajectory_jsonl;
use serde_json::json;

use crate::error::CliError;
use crate::io::read_bytes;
use crate::{Ctx, Done};

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Standard error and Wilson interval of a proportion.
    Wilson(WilsonArgs),
    /// Normal-approximation interval around a mean.
    Ci(CiArgs),
    /// Denoiser evaluations per generated result.
    Nfe(NfeArgs),
    /// Image-iteration histogram of a trajectory file.
    Hist(HistArgs),
    /// Latency ratio of a base and a fast configuration.
    Speedup(SpeedupArgs),
}

impl StatsCommand {
    pub fn name(&self) -> &'static str {
        match self {
            StatsCommand::Wilson(_) => "wilson",
            StatsCommand::Ci(_) => "ci",
            StatsCommand::Nfe(_) => "nfe",
            StatsCommand::Hist(_) => "hist",
            StatsCommand::Speedup(_) => "speedup",
        }
    }
}

#[derive(Debug, Args)]
pub struct WilsonArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[arg(long)]
    mean: f64,
    #[arg(long)]
    se: f64,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
}

#[derive(Debug, Args)]
pub struct NfeArgs {
    #[arg(long)]
    steps: u64,
    /// Classifier-free guidance off (one evaluation per step).
    #[arg(long)]
    no_cfg: bool,
    #[arg(long, default_value_t = 1)]
    iters: u64,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[arg(long)]
    traj: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpeedupArgs {
    /// Base latency in seconds.
    #[arg(long)]
    base: f64,
    /// Fast latency in seconds.
    #[arg(long)]
    fast: f64,
}

pub fn run(c: StatsCommand, ctx: &mut Ctx) -> Result<Done, CliError> {
    match c {
        StatsCommand::Wilson(a) => {
            ctx.inputs.param("args", (a.p, a.n, a.confidence));
            let se = se_binomial(a.p, a.n)?;
            let (lo, hi) = wilson_interval(a.p, a.n, a.confidence)?;
            Ok(Done {
                text: format!("se {se}\nwilson {lo} {hi}"),
                results: json!({ "p_hat": a.p, "n": a.n, "confidence": a.confidence, "se": se, "wilson": [lo, hi] }),
            })
        }
        StatsCommand::Ci(a) => {
            ctx.inputs.param("args", (a.mean, a.se, a.confidence));
            let (lo, hi) = normal_ci(a.mean, a.se, a.confidence)?;
            Ok(Done {
                text: format!("ci {lo} {hi}"),
                results: json!({ "mean": a.mean, "se": a.se, "confidence": a.confidence, "interval": [lo, hi] }),
            })
        }
        StatsCommand::Nfe(a) => {
            let cfg = NfeConfig { sampling_steps: a.steps, cfg_enabled: !a.no_cfg, iterations: a.iters };
            ctx.inputs.param("config", cfg);
            let n = nfe(cfg)?;
            Ok(Done { text: n.to_string(), results: json!({ "config": cfg, "nfe": n }) })
        }
        StatsCommand::Hist(a) => {
            let trajs = parse_trajectory_jsonl(&read_bytes(&a.traj, "trajectories", &mut ctx.inputs)?)?;
            let hist = histogram(&trajs)?;
            let text = hist.counts.iter().map(|(k, n)| format!("{k}\t{n}")).collect::<Vec<_>>().join("\n");
            Ok(Done { text, results: json!({ "total": hist.total(), "counts": hist.counts }) })
        }
        StatsCommand::Speedup(a) => {
            ctx.inputs.param("args", (a.base, a.fast));
            let s = speedup(a.base, a.fast)?;
            Ok(Done { text: s.to_string(), results: json!({ "base": a.base, "fast": a.fast, "speedup": s }) })
        }
    }
}
