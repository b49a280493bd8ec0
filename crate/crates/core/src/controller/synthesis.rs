use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adapters::{AgentAdapters, Canvas, Instruction, PromptSpec};
use super::consensus::{blind_ab, consensus_filter};
use super::episode::{run_episode, DiscardReason, EngineConfig, EpisodeLog};
use super::state::ControllerState;
use super::ControllerError;
use crate::rng::{item_stream, StreamRng};
use crate::stats::IterationHistogram;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisStats {
    pub attempted: u64,
    pub retained: u64,
    pub retention_rate: f64,
    pub discard_reasons: BTreeMap<DiscardReason, u64>,
    pub fail_mid: u64,
    pub iteration_histogram: BTreeMap<usize, u64>,
}

#[derive(Debug, Clone)]
pub struct SynthesisOutput {
    pub trajectories: Vec<Trajectory>,
    pub stats: SynthesisStats,
    /// One log per prompt, in input order.
    pub logs: Vec<EpisodeLog>,
}

/// Single-shot generation of the whole prompt, the reference the judges
/// compare against.
fn baseline(
    prompt: &PromptSpec,
    adapters: AgentAdapters<'_>,
    config: &EngineConfig,
    rng: &mut StreamRng,
) -> Result<Option<Canvas>, ControllerError> {
    let instr = Instruction { text: prompt.text.clone(), targets: prompt.requirements.clone() };
    let id = format!("{}-baseline", prompt.id);
    for _ in 0..config.budget.limit(ControllerState::GenerateBaseImage) {
        if let Some(c) = adapters.generator.generate(&instr, None, &id, rng)? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

fn synthesize_one(
    prompt: &PromptSpec,
    adapters: AgentAdapters<'_>,
    config: &EngineConfig,
    rng: &mut StreamRng,
) -> Result<(Option<Trajectory>, EpisodeLog), ControllerError> {
    let mut outcome = run_episode(prompt, adapters, config, rng)?;
    let (Some(traj), Some(candidate)) = (outcome.trajectory.take(), outcome.canvas.take()) else {
        return Ok((None, outcome.log));
    };
    let mut log = outcome.log;
    let discard = |log: &mut EpisodeLog, reason, fail_mid, message: String| {
        log.discard = Some(reason);
        log.fail_mid = fail_mid;
        log.message = Some(message);
    };

    let base = match baseline(prompt, adapters, config, rng) {
        Ok(Some(b)) => b,
        Ok(None) => {
            discard(&mut log, DiscardReason::Budget, false, "baseline generation kept failing".into());
            return Ok((None, log));
        }
        Err(ControllerError::Adapter(e)) => {
            discard(&mut log, DiscardReason::FormatViolation, true, format!("FAIL(mid): {e}"));
            return Ok((None, log));
        }
        Err(e) => return Err(e),
    };

    let mut verdicts = [None, None];
    for (slot, judge) in verdicts.iter_mut().zip(adapters.judges) {
        match blind_ab(&candidate, &base, judge, prompt, rng) {
            Ok(choice) => *slot = Some(choice.favours_candidate()),
            Err(ControllerError::Adapter(e)) => {
                discard(&mut log, DiscardReason::FormatViolation, true, format!("FAIL(mid): {e}"));
                return Ok((None, log));
            }
            Err(e) => return Err(e),
        }
    }
    let keep = consensus_filter(verdicts[0], verdicts[1])?;
    log.judgments = Some([verdicts[0].unwrap_or(false), verdicts[1].unwrap_or(false)]);
    if keep {
        Ok((Some(traj), log))
    } else {
        discard(&mut log, DiscardReason::ConsensusReject, false, "judges did not both prefer the multi-step result".into());
        Ok((None, log))
    }
}

/// Run every prompt through the closed loop and consensus filter.
///
/// Prompt `i` draws from `item_stream(master_seed, i)`, so the output does
/// not depend on `threads` or scheduling.
pub fn synthesize_dataset(
    prompts: &[PromptSpec],
    adapters: AgentAdapters<'_>,
    config: &EngineConfig,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<SynthesisOutput, ControllerError> {
    if prompts.is_empty() {
        return Err(ControllerError::EmptyPrompts);
    }
    let work = || {
        prompts
            .par_iter()
            .enumerate()
            .map(|(i, p)| synthesize_one(p, adapters, config, &mut item_stream(master_seed, i as u64)))
            .collect::<Vec<_>>()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ControllerError::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut trajectories = Vec::new();
    let mut logs = Vec::with_capacity(prompts.len());
    let mut discard_reasons: BTreeMap<DiscardReason, u64> = DiscardReason::ALL.iter().map(|&r| (r, 0)).collect();
    let mut histogram = IterationHistogram::default();
    let mut fail_mid = 0;
    for result in results {
        let (traj, log) = result?;
        if let Some(reason) = log.discard {
            *discard_reasons.entry(reason).or_insert(0) += 1;
        }
        fail_mid += u64::from(log.fail_mid);
        if let Some(t) = traj {
            histogram.record(t.image_count());
            trajectories.push(t);
        }
        logs.push(log);
    }
    let attempted = prompts.len() as u64;
    let retained = trajectories.len() as u64;
    Ok(SynthesisOutput {
        trajectories,
        stats: SynthesisStats {
            attempted,
            retained,
            retention_rate: retained as f64 / attempted as f64,
            discard_reasons,
            fail_mid,
            iteration_histogram: histogram.counts,
        },
        logs,
    })
}
