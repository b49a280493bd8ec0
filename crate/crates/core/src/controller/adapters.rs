use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ControllerError;
use crate::rng::StreamRng;
use crate::trajectory::{Action, ImageRef, ReasoningStep};

/// Fault raised by an agent adapter. Surfaces as a FAIL(mid) episode.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct AdapterError(pub String);

/// A prompt together with its atomic requirement list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: String,
    pub text: String,
    pub requirements: Vec<String>,
}

/// The current image plus the requirements it actually satisfies. Only
/// simulated adapters read `satisfied`; real ones see the image alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    pub image: ImageRef,
    pub satisfied: BTreeSet<String>,
}

/// Step-level requirement list with per-item verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checklist {
    items: Vec<String>,
    satisfied: Vec<bool>,
}

impl Checklist {
    pub fn new(items: Vec<String>) -> Self {
        let satisfied = vec![false; items.len()];
        Checklist { items, satisfied }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn satisfied(&self) -> &[bool] {
        &self.satisfied
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|&s| s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    /// Requirements this step is meant to realise; becomes the step checklist.
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub reasoning: String,
    pub action: Action,
    pub instruction: Option<Instruction>,
}

pub struct PlannerContext<'a> {
    pub prompt: &'a PromptSpec,
    pub canvas: Option<&'a Canvas>,
    /// Gaps from the latest active verification, if one ran.
    pub gaps: Option<&'a [String]>,
    pub history: &'a [ReasoningStep],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    First,
    Second,
    Tie,
}

pub trait Planner: Send + Sync {
    fn decide(&self, ctx: &PlannerContext<'_>, rng: &mut StreamRng) -> Result<Decision, AdapterError>;
}

pub trait Generator: Send + Sync {
    /// `Ok(None)` is a transient tool failure that the controller may retry.
    fn generate(
        &self,
        instruction: &Instruction,
        base: Option<&Canvas>,
        image_id: &str,
        rng: &mut StreamRng,
    ) -> Result<Option<Canvas>, AdapterError>;
}

pub trait PassiveVerifier: Send + Sync {
    /// One verdict per checklist item.
    fn check(&self, canvas: &Canvas, items: &[String], rng: &mut StreamRng) -> Result<Vec<bool>, AdapterError>;
}

pub trait ActiveVerifier: Send + Sync {
    fn gaps(&self, canvas: &Canvas, prompt: &PromptSpec, rng: &mut StreamRng) -> Result<Vec<String>, AdapterError>;
}

pub trait Judge: Send + Sync {
    /// Which of two unlabeled images better fits the prompt.
    fn prefer(&self, first: &Canvas, second: &Canvas, prompt: &PromptSpec, rng: &mut StreamRng)
        -> Result<Slot, AdapterError>;
}

#[derive(Clone, Copy)]
pub struct AgentAdapters<'a> {
    pub planner: &'a dyn Planner,
    pub generator: &'a dyn Generator,
    pub passive: &'a dyn PassiveVerifier,
    pub active: &'a dyn ActiveVerifier,
    pub judges: [&'a dyn Judge; 2],
}

/// Gate a step on its checklist. Fills in the verdicts and returns whether
/// every item passed.
pub fn passive_verify(
    canvas: &Canvas,
    checklist: &mut Checklist,
    verifier: &dyn PassiveVerifier,
    rng: &mut StreamRng,
) -> Result<bool, ControllerError> {
    if checklist.is_empty() {
        return Err(ControllerError::EmptyChecklist);
    }
    let verdicts = verifier.check(canvas, &checklist.items, rng)?;
    if verdicts.len() != checklist.items.len() {
        return Err(ControllerError::Adapter(AdapterError(format!(
            "passive verifier returned {} verdicts for {} items",
            verdicts.len(),
            checklist.items.len()
        ))));
    }
    checklist.satisfied = verdicts;
    Ok(checklist.all_satisfied())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub gaps: Vec<String>,
}

impl GapReport {
    pub fn is_aligned(&self) -> bool {
        self.gaps.is_empty()
    }
}

pub fn active_verify(
    canvas: &Canvas,
    prompt: &PromptSpec,
    verifier: &dyn ActiveVerifier,
    rng: &mut StreamRng,
) -> Result<GapReport, ControllerError> {
    Ok(GapReport { gaps: verifier.gaps(canvas, prompt, rng)? })
}
