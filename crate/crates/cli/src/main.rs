//! `clvr`: dataset synthesis, trajectory tooling, delta merging, geometry
//! experiments, complexity probe analytics and statistics.

mod cmd;
mod error;
mod io;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use error::CliError;
use report::Inputs;

pub const SEED_ENV: &str = "CLVR_SEED";

#[derive(Debug, Parser)]
#[command(name = "clvr", version, about = "Closed-loop visual reasoning toolkit")]
struct Cli {
    /// Master seed; falls back to $CLVR_SEED, then to the config file or 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write a JSON report to this path (`-` for stdout).
    #[arg(long, global = true, value_name = "PATH")]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the simulated agent over a prompt file and keep the trajectories that pass.
    Synthesize(cmd::synth::SynthesizeArgs),
    /// Run the plan/generate loop without verification.
    Infer(cmd::synth::InferArgs),
    /// Expand trajectories into per-step training samples.
    Truncate(cmd::synth::TruncateArgs),
    /// Sample an RL batch of truncated contexts with proxy prompts.
    Batch(cmd::prep::BatchArgs),
    /// Evaluate the per-step proxy reward.
    Reward(cmd::prep::RewardArgs),
    /// Add deltas (or fine-tuned checkpoints) onto a base checkpoint.
    Merge(cmd::weights::MergeArgs),
    /// Materialise a LoRA adapter as a dense delta.
    LoraExpand(cmd::weights::LoraArgs),
    /// Relative Frobenius distance between two checkpoints.
    Norm(cmd::weights::NormArgs),
    /// Toy experiments on the geometry of merged increments.
    Geomlab(GeomlabArgs),
    /// Task complexity probe.
    Probe(ProbeArgs),
    /// Interval, NFE and latency arithmetic.
    Stats(StatsArgs),
    /// Validate a trajectory file and summarise it.
    Report(cmd::synth::ReportArgs),
}

#[derive(Debug, Args)]
struct GeomlabArgs {
    #[command(subcommand)]
    command: cmd::geom::GeomCommand,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[command(subcommand)]
    command: cmd::probe::ProbeCommand,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(subcommand)]
    command: cmd::stats::StatsCommand,
}

/// What a command produced: text for stdout and the report payload.
pub struct Done {
    pub text: String,
    pub results: Value,
}

pub struct Ctx {
    seed: Option<u64>,
    pub inputs: Inputs,
}

impl Ctx {
    /// Explicit `--seed`, else `$CLVR_SEED`, else `None`.
    pub fn inputs_mut(&mut self) -> &mut Inputs {
        &mut self.inputs
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={v:?} is not an unsigned 64-bit integer"))),
        Err(_) => Ok(None),
    }
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Synthesize(_) => "synthesize".into(),
        Command::Infer(_) => "infer".into(),
        Command::Truncate(_) => "truncate".into(),
        Command::Batch(_) => "batch".into(),
        Command::Reward(_) => "reward".into(),
        Command::Merge(_) => "merge".into(),
        Command::LoraExpand(_) => "lora-expand".into(),
        Command::Norm(_) => "norm".into(),
        Command::Geomlab(g) => format!("geomlab {}", g.command.name()),
        Command::Probe(p) => format!("probe {}", p.command.name()),
        Command::Stats(s) => format!("stats {}", s.command.name()),
        Command::Report(_) => "report".into(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let name = command_name(&cli.command);
    let seed = resolve_seed(cli.seed)?;
    let mut ctx = Ctx { seed, inputs: Inputs::new(&name) };
    if let Some(s) = seed {
        ctx.inputs.param("seed", s);
    }
    let done = match cli.command {
        Command::Synthesize(a) => cmd::synth::synthesize(a, &mut ctx),
        Command::Infer(a) => cmd::synth::infer(a, &mut ctx),
        Command::Truncate(a) => cmd::synth::truncate(a, &mut ctx),
        Command::Batch(a) => cmd::prep::batch(a, &mut ctx),
        Command::Reward(a) => cmd::prep::reward(a, &mut ctx),
        Command::Merge(a) => cmd::weights::merge(a, &mut ctx),
        Command::LoraExpand(a) => cmd::weights::lora_expand(a, &mut ctx),
        Command::Norm(a) => cmd::weights::norm(a, &mut ctx),
        Command::Geomlab(g) => cmd::geom::run(g.command, &mut ctx),
        Command::Probe(p) => cmd::probe::run(p.command, &mut ctx),
        Command::Stats(s) => cmd::stats::run(s.command, &mut ctx),
        Command::Report(a) => cmd::synth::report(a, &mut ctx),
    }?;
    if !done.text.is_empty() {
        let mut text = done.text;
        if !text.ends_with('\n') {
            text.push('\n');
        }
        io::write_bytes(std::path::Path::new("-"), text.as_bytes())?;
    }
    if let Some(path) = &cli.report {
        report::write_report(path, &name, &ctx.inputs, &done.results)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let mut lines = rendered.lines();
            let first = lines.next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::usage(first.trim_start_matches("error: ")));
            for line in lines {
                eprintln!("{line}");
            }
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
