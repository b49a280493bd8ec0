use std::path::PathBuf;

use clap::{Args, Subcommand};
use clvr_core::geometry::{
    constructed_toy, epsilon_sweep, superposition_sweep, trained_toy, truncation_gap, Activation, OdeSetup,
    TinyNet, ToyTrainingConfig,
};
use clvr_core::rng::seeded;
use rand::Rng;
use serde::Deserialize;
use serde_json::json;

use super::num;
use crate::error::CliError;
use crate::io::load_config_or_default;
use crate::{Ctx, Done};

#[derive(Debug, Args)]
pub struct GeomArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GeomCommand {
    /// First-order superposition residual of two increments vs their scale.
    Superpose(GeomArgs),
    /// Orthogonality of distillation and alignment output increments.
    Decouple(GeomArgs),
    /// Gap between the full flow and the merged one-step jump.
    Truncation(GeomArgs),
}

impl GeomCommand {
    pub fn name(&self) -> &'static str {
        match self {
            GeomCommand::Superpose(_) => "superpose",
            GeomCommand::Decouple(_) => "decouple",
            GeomCommand::Truncation(_) => "truncation",
        }
    }
}

pub fn run(c: GeomCommand, ctx: &mut Ctx) -> Result<Done, CliError> {
    match c {
        GeomCommand::Superpose(a) => superpose(a, ctx),
        GeomCommand::Decouple(a) => decouple(a, ctx),
        GeomCommand::Truncation(a) => truncation(a, ctx),
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SuperposeConfig {
    widths: Vec<usize>,
    scales: Vec<f64>,
    inputs: Vec<Vec<f64>>,
    seed: u64,
}

impl Default for SuperposeConfig {
    fn default() -> Self {
        SuperposeConfig {
            widths: vec![2, 16, 2],
            scales: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            inputs: vec![vec![0.5, -0.5], vec![1.0, 0.2], vec![-0.8, 0.6], vec![0.1, 0.9]],
            seed: 5,
        }
    }
}

fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn superpose(a: GeomArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let cfg: SuperposeConfig = load_config_or_default(a.config.as_deref(), &mut ctx.inputs)?;
    let seed = ctx.seed_or(cfg.seed);
    ctx.inputs.param("seed", seed);
    let (Some(&n_in), Some(&n_out)) = (cfg.widths.first(), cfg.widths.last()) else {
        return Err(CliError::new("config", "widths must not be empty"));
    };
    let mut rng = seeded(seed);

    let net = TinyNet::new(cfg.widths.clone(), Activation::Tanh)?;
    let params = net.init(&mut rng);
    let d1 = unit_vector(&mut rng, params.len());
    let d2 = unit_vector(&mut rng, params.len());
    let tanh = superposition_sweep(&net, &params, &d1, &d2, &cfg.scales, &cfg.inputs)?;

    let linear = TinyNet::new(vec![n_in, n_out], Activation::Identity)?;
    let lp = linear.init(&mut rng);
    let l1 = unit_vector(&mut rng, lp.len());
    let l2 = unit_vector(&mut rng, lp.len());
    let control = superposition_sweep(&linear, &lp, &l1, &l2, &cfg.scales, &cfg.inputs)?;

    let mut text = String::from("scale\ttanh\tlinear\n");
    for ((s, e), c) in tanh.scales.iter().zip(&tanh.errors).zip(&control.errors) {
        text.push_str(&format!("{s}\t{}\t{}\n", num(*e), num(*c)));
    }
    match tanh.log_log_slope {
        Some(slope) => text.push_str(&format!("log_log_slope {}", num(slope))),
        None => text.push_str("log_log_slope undefined"),
    }
    Ok(Done { text, results: json!({ "seed": seed, "widths": cfg.widths, "tanh": tanh, "linear_control": control }) })
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DecoupleConfig {
    trained: ToyTrainingConfig,
    constructed_epsilon: f64,
    constructed_probes: usize,
}

impl Default for DecoupleConfig {
    fn default() -> Self {
        DecoupleConfig { trained: ToyTrainingConfig::default(), constructed_epsilon: 0.05, constructed_probes: 1000 }
    }
}

fn decouple(a: GeomArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let mut cfg: DecoupleConfig = load_config_or_default(a.config.as_deref(), &mut ctx.inputs)?;
    cfg.trained.seed = ctx.seed_or(cfg.trained.seed);
    ctx.inputs.param("seed", cfg.trained.seed);
    let toy = constructed_toy(cfg.constructed_epsilon, cfg.constructed_probes)?;
    let trained = trained_toy(&cfg.trained)?;
    let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), num);
    let text = format!(
        "constructed_max_abs_cos {}\ntrained_median_abs_cos {}\ntrained_mean_abs_cos {}\ndistill_normal_share {}\nalign_tangent_share {}",
        fmt(toy.max_abs),
        fmt(trained.stats.median_abs),
        fmt(trained.stats.mean_abs),
        num(trained.distill_normal_share),
        num(trained.align_tangent_share)
    );
    Ok(Done { text, results: json!({ "config": cfg.trained, "constructed": toy, "trained": trained }) })
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TruncationConfig {
    setup: OdeSetup,
    epsilons: Vec<f64>,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig { setup: OdeSetup::default(), epsilons: vec![0.2, 0.1, 0.05, 0.02] }
    }
}

fn truncation(a: GeomArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let cfg: TruncationConfig = load_config_or_default(a.config.as_deref(), &mut ctx.inputs)?;
    let zero = OdeSetup { direction: vec![0.0; cfg.setup.direction.len()], ..cfg.setup.clone() };
    let zero_gap = truncation_gap(&zero)?.gap;
    let sweep = epsilon_sweep(&cfg.setup, &cfg.epsilons)?;
    let mut text = format!("gap_without_alignment {}\nepsilon\tgap\n", num(zero_gap));
    for (e, g) in sweep.epsilons.iter().zip(&sweep.gaps) {
        text.push_str(&format!("{e}\t{}\n", num(*g)));
    }
    match sweep.log_log_slope {
        Some(s) => text.push_str(&format!("log_log_slope {}", num(s))),
        None => text.push_str("log_log_slope undefined"),
    }
    Ok(Done { text, results: json!({ "setup": cfg.setup, "gap_without_alignment": zero_gap, "sweep": sweep }) })
}
