//! State-constrained closed-loop controller: the data engine that turns
//! prompts into verified trajectories, and the inference loop.

mod adapters;
mod consensus;
mod episode;
mod inference;
mod sim;
mod state;
mod synthesis;

pub use adapters::{
    active_verify, passive_verify, ActiveVerifier, AdapterError, AgentAdapters, Canvas, Checklist, Decision, GapReport,
    Generator, Instruction, Judge, PassiveVerifier, Planner, PlannerContext, PromptSpec, Slot,
};
pub use consensus::{blind_ab, consensus_filter, Choice};
pub use episode::{run_episode, ActiveVerifyMode, DiscardReason, EngineConfig, EpisodeLog, EpisodeOutcome};
pub use inference::{run_inference, InferenceOutcome, CAP_REASONING};
pub use sim::{parse_prompts, SimEnv, SimEnvConfig, SimJudge};
pub use state::{step_state, ControllerState, Event, RetryBudget, DEFAULT_RETRY_LIMIT};
pub use synthesis::{synthesize_dataset, SynthesisOutput, SynthesisStats};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("illegal transition: {event:?} in state {state}")]
    IllegalTransition { state: ControllerState, event: Event },
    #[error("checklist is empty")]
    EmptyChecklist,
    #[error("no prompts given")]
    EmptyPrompts,
    #[error("prompt file line {line}: {message}")]
    Prompt { line: usize, message: String },
    #[error("adapter fault: {0}")]
    Adapter(#[from] AdapterError),
    #[error("generator: {0}")]
    Generator(String),
    #[error("unsupported action {0}")]
    UnsupportedAction(String),
    #[error("candidate and baseline are the same item {0:?}")]
    SameItem(String),
    #[error("judge {judge} gave no verdict")]
    MissingJudgment { judge: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[cfg(test)]
mod tests;
