use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use clvr_core::alignment::{
    build_rl_batch, proxy_reward, RewardInputs, RewardWeights, RlConfig, SimExtractor, TaskKind, TaskMixWeights,
};
use clvr_core::trajectory::parse_trajectory_jsonl;
use serde_json::json;

use super::{emit, jsonl};
use crate::error::CliError;
use crate::io::{load_config_or_default, read_bytes};
use crate::{Ctx, Done};

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// JSONL destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Task-mix weights (TOML or JSON).
    #[arg(long)]
    mix: Option<PathBuf>,
    /// RL hyperparameters, recorded in the report only.
    #[arg(long)]
    rl_config: Option<PathBuf>,
}

pub fn batch(a: BatchArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let trajs = parse_trajectory_jsonl(&read_bytes(&a.traj, "trajectories", &mut ctx.inputs)?)?;
    let mix: TaskMixWeights = load_config_or_default(a.mix.as_deref(), &mut ctx.inputs)?;
    let rl: RlConfig = load_config_or_default(a.rl_config.as_deref(), &mut ctx.inputs)?;
    rl.validate()?;
    let seed = ctx.seed_or(0);
    ctx.inputs.param("n", a.n);
    ctx.inputs.param("master_seed", seed);

    let items = build_rl_batch(&trajs, a.n, seed, &mix, &SimExtractor)?;
    let mut tasks: BTreeMap<String, u64> = BTreeMap::new();
    for item in &items {
        let key = match item.task {
            TaskKind::T2i => "t2i".to_string(),
            TaskKind::I2i { bucket } => format!("i2i_{}", serde_json::to_value(bucket)?.as_str().unwrap_or("?")),
        };
        *tasks.entry(key).or_default() += 1;
    }
    let text = emit(a.out.as_deref(), jsonl(&items)?)?;
    Ok(Done {
        text,
        results: json!({ "items": items.len(), "master_seed": seed, "tasks": tasks, "mix": mix, "rl_config": rl }),
    })
}

#[derive(Debug, Args)]
pub struct RewardArgs {
    /// Step index; 0 is the first image.
    #[arg(long)]
    t: usize,
    #[arg(long)]
    t2i: f64,
    /// Required for t > 0, rejected at t = 0.
    #[arg(long)]
    i2i: Option<f64>,
    /// Weight of the T2I term for t > 0; the I2I term gets the rest.
    #[arg(long, default_value_t = 0.5)]
    w_t2i: f64,
}

pub fn reward(a: RewardArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let inputs = RewardInputs { t: a.t, r_t2i: a.t2i, r_i2i: a.i2i };
    let weights = RewardWeights { t2i: a.w_t2i, i2i: 1.0 - a.w_t2i };
    ctx.inputs.param("inputs", inputs);
    ctx.inputs.param("weights", weights);
    let r = proxy_reward(inputs, weights)?;
    Ok(Done { text: r.to_string(), results: json!({ "inputs": inputs, "weights": weights, "reward": r }) })
}
