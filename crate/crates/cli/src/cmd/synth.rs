use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use clvr_core::controller::{
    parse_prompts, run_inference, synthesize_dataset, EngineConfig, SimEnv, SimEnvConfig,
};
use clvr_core::rng::item_stream;
use clvr_core::stats::histogram;
use clvr_core::trajectory::{
    expand_all, export_sharegpt, parse_trajectory_jsonl, serialize_jsonl, truncate_at, validate_trajectory,
    Trajectory, TruncatedSample, ValidationOptions,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{emit, jsonl, pretty};
use crate::error::CliError;
use crate::io::{load_config_or_default, read_bytes, read_text, write_bytes};
use crate::{Ctx, Done};

/// Synthesis config file: `[sim]` and `[engine]` tables plus an optional
/// worker count.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub sim: SimEnvConfig,
    pub engine: EngineConfig,
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    prompts: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write the synthesis statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Write one episode log per prompt as JSONL.
    #[arg(long)]
    logs: Option<PathBuf>,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

pub fn synthesize(a: SynthesizeArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let cfg: SynthConfig = load_config_or_default(a.config.as_deref(), &mut ctx.inputs)?;
    let prompts = parse_prompts(&read_text(&a.prompts, "prompts", &mut ctx.inputs)?)?;
    let seed = ctx.seed_or(cfg.sim.master_seed);
    ctx.inputs.param("master_seed", seed);

    let env = SimEnv::new(cfg.sim.clone())?;
    let out = synthesize_dataset(&prompts, env.adapters(), &cfg.engine, seed, a.threads.or(cfg.threads))?;
    write_bytes(&a.out, &serialize_jsonl(&out.trajectories))?;
    if let Some(p) = &a.stats {
        write_bytes(p, pretty(&out.stats)?.as_bytes())?;
    }
    if let Some(p) = &a.logs {
        write_bytes(p, &jsonl(&out.logs)?)?;
    }
    let s = &out.stats;
    Ok(Done {
        text: format!("attempted {}\nretained {}\nretention_rate {}", s.attempted, s.retained, s.retention_rate),
        results: json!({ "master_seed": seed, "stats": s }),
    })
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    prompt_file: PathBuf,
    #[arg(long, default_value_t = 8)]
    max_iters: usize,
    /// Simulator settings (`[sim]` table of the synthesis config).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the trajectories as JSONL.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct InferRow {
    id: String,
    final_image: Option<String>,
    images: usize,
    terminated: bool,
}

pub fn infer(a: InferArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let cfg: SynthConfig = load_config_or_default(a.config.as_deref(), &mut ctx.inputs)?;
    let prompts = parse_prompts(&read_text(&a.prompt_file, "prompts", &mut ctx.inputs)?)?;
    let seed = ctx.seed_or(cfg.sim.master_seed);
    ctx.inputs.param("master_seed", seed);
    ctx.inputs.param("max_iters", a.max_iters);

    let env = SimEnv::new(cfg.sim)?;
    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    for (i, p) in prompts.iter().enumerate() {
        let outcome = run_inference(p, &env, &env, a.max_iters, &mut item_stream(seed, i as u64))?;
        rows.push(InferRow {
            id: p.id.clone(),
            final_image: outcome.final_image.map(|img| img.id),
            images: outcome.trajectory.image_count(),
            terminated: outcome.trajectory.terminated,
        });
        trajectories.push(outcome.trajectory);
    }
    if let Some(p) = &a.out {
        write_bytes(p, &serialize_jsonl(&trajectories))?;
    }
    let text = rows
        .iter()
        .map(|r| format!("{}\t{}\t{}", r.id, r.final_image.as_deref().unwrap_or("-"), r.images))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Done { text, results: json!({ "master_seed": seed, "prompts": rows }) })
}

fn read_trajectories(path: &Path, ctx: &mut Ctx) -> Result<Vec<Trajectory>, CliError> {
    let bytes = read_bytes(path, "trajectories", &mut ctx.inputs)?;
    Ok(parse_trajectory_jsonl(&bytes)?)
}

#[derive(Debug, Args)]
pub struct TruncateArgs {
    #[arg(long)]
    traj: PathBuf,
    /// Only this step; every step when absent.
    #[arg(long)]
    t: Option<usize>,
    /// JSONL destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SampleLine<'a> {
    trajectory_id: &'a str,
    #[serde(flatten)]
    sample: &'a TruncatedSample,
}

pub fn truncate(a: TruncateArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let trajs = read_trajectories(&a.traj, ctx)?;
    ctx.inputs.param("t", a.t);
    let mut samples = Vec::new();
    let mut too_short = 0usize;
    for traj in &trajs {
        let expanded = match a.t {
            Some(t) if t >= traj.image_count() => {
                too_short += 1;
                continue;
            }
            Some(t) => vec![truncate_at(traj, t)?],
            None => expand_all(traj)?,
        };
        samples.extend(expanded.into_iter().map(|s| (traj.id.as_str(), s)));
    }
    let lines: Vec<SampleLine> = samples.iter().map(|(id, s)| SampleLine { trajectory_id: id, sample: s }).collect();
    let mut per_t: BTreeMap<usize, u64> = BTreeMap::new();
    for (_, s) in &samples {
        *per_t.entry(s.t).or_default() += 1;
    }
    let text = emit(a.out.as_deref(), jsonl(&lines)?)?;
    Ok(Done { text, results: json!({ "trajectories": trajs.len(), "too_short": too_short, "samples": samples.len(), "per_step": per_t }) })
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    traj: PathBuf,
    /// Require every image step to have passed passive verification.
    #[arg(long)]
    retained: bool,
    /// Fail (exit 1) if any trajectory is invalid.
    #[arg(long)]
    strict: bool,
    /// Also export the trajectories as a ShareGPT JSON array.
    #[arg(long)]
    sharegpt: Option<PathBuf>,
}

pub fn report(a: ReportArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let trajs = read_trajectories(&a.traj, ctx)?;
    ctx.inputs.param("retained", a.retained);
    let opts = if a.retained { ValidationOptions::retained() } else { ValidationOptions::default() };
    let invalid: Vec<_> = trajs
        .iter()
        .filter_map(|t| {
            let r = validate_trajectory(t, opts);
            (!r.is_valid()).then(|| json!({ "id": t.id, "violations": r.violations }))
        })
        .collect();
    if a.strict && !invalid.is_empty() {
        return Err(CliError::new("trajectory", format!("{} of {} trajectories are invalid", invalid.len(), trajs.len())));
    }
    let with_images: Vec<&Trajectory> = trajs.iter().filter(|t| t.image_count() > 0).collect();
    let hist = histogram(with_images.iter().copied())?;
    if let Some(p) = &a.sharegpt {
        let records = trajs.iter().map(export_sharegpt).collect::<Result<Vec<_>, _>>()?;
        write_bytes(p, pretty(&records)?.as_bytes())?;
    }
    let terminated = trajs.iter().filter(|t| t.terminated).count();
    let images: usize = trajs.iter().map(Trajectory::image_count).sum();
    let mut text = format!(
        "trajectories {}\nterminated {terminated}\nimages {images}\ninvalid {}\n",
        trajs.len(),
        invalid.len()
    );
    for (k, n) in &hist.counts {
        text.push_str(&format!("iterations {k}: {n}\n"));
    }
    Ok(Done {
        text,
        results: json!({
            "trajectories": trajs.len(),
            "terminated": terminated,
            "images": images,
            "iteration_histogram": hist.counts,
            "invalid": invalid,
        }),
    })
}
