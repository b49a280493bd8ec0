use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::adapters::{
    active_verify, passive_verify, AgentAdapters, Canvas, Checklist, Decision, Instruction, PlannerContext, PromptSpec,
};
use super::state::{step_state, ControllerState, Event, RetryBudget};
use super::ControllerError;
use crate::rng::StreamRng;
use crate::trajectory::{validate_trajectory, Action, ReasoningStep, Trajectory, ValidationOptions, MAX_ITERATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    PassiveFailure,
    Budget,
    ConsensusReject,
    FormatViolation,
}

impl DiscardReason {
    pub const ALL: [DiscardReason; 4] = [
        DiscardReason::PassiveFailure,
        DiscardReason::Budget,
        DiscardReason::ConsensusReject,
        DiscardReason::FormatViolation,
    ];
}

/// When the controller calls the active verifier on entering `Validate`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveVerifyMode {
    /// On every entry.
    #[default]
    EachValidate,
    /// Only once the gaps from the previous check have all been edited.
    PlanExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub budget: RetryBudget,
    pub max_iterations: usize,
    pub active_verify: ActiveVerifyMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { budget: RetryBudget::default(), max_iterations: MAX_ITERATIONS, active_verify: ActiveVerifyMode::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub prompt_id: String,
    pub path: Vec<ControllerState>,
    pub events: Vec<Event>,
    /// Highest per-visit usage seen for each state.
    pub peak_budget: BTreeMap<ControllerState, u32>,
    pub iterations: usize,
    pub discard: Option<DiscardReason>,
    /// Set when an adapter fault aborted the episode.
    pub fail_mid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgments: Option<[bool; 2]>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub trajectory: Option<Trajectory>,
    /// Final canvas of a successful episode, used for consensus judging.
    pub canvas: Option<Canvas>,
    pub log: EpisodeLog,
}

enum Abort {
    Discard(DiscardReason, String),
    FailMid(String),
    Bug(ControllerError),
}

impl From<ControllerError> for Abort {
    fn from(e: ControllerError) -> Self {
        match e {
            ControllerError::Adapter(a) => Abort::FailMid(a.0),
            ControllerError::EmptyChecklist => Abort::Discard(DiscardReason::FormatViolation, e.to_string()),
            other => Abort::Bug(other),
        }
    }
}

impl From<super::adapters::AdapterError> for Abort {
    fn from(e: super::adapters::AdapterError) -> Self {
        Abort::FailMid(e.0)
    }
}

struct Run<'a, 'r> {
    prompt: &'a PromptSpec,
    adapters: AgentAdapters<'a>,
    config: &'a EngineConfig,
    rng: &'r mut StreamRng,
    state: ControllerState,
    budget: RetryBudget,
    log: EpisodeLog,
    steps: Vec<ReasoningStep>,
    canvas: Option<Canvas>,
    /// Checklist of the base image, gated in `Inspect`.
    targets: Vec<String>,
    gaps: Vec<String>,
}

impl Run<'_, '_> {
    fn fire(&mut self, event: Event) -> Result<(), Abort> {
        let next = step_state(self.state, event)?;
        self.log.events.push(event);
        self.log.path.push(next);
        if next != self.state {
            self.budget.enter(next);
        }
        self.state = next;
        Ok(())
    }

    fn spend(&mut self) -> Result<(), Abort> {
        let state = self.state;
        if self.budget.try_consume(state) {
            let peak = self.log.peak_budget.entry(state).or_insert(0);
            *peak = (*peak).max(self.budget.used(state));
            return Ok(());
        }
        self.fire(Event::BudgetExhausted)?;
        Err(Abort::Discard(DiscardReason::Budget, format!("retry budget exhausted in {state}")))
    }

    fn decide(&mut self) -> Result<Decision, Abort> {
        let gaps = self.canvas.as_ref().map(|_| self.gaps.as_slice());
        let ctx = PlannerContext { prompt: self.prompt, canvas: self.canvas.as_ref(), gaps, history: &self.steps };
        Ok(self.adapters.planner.decide(&ctx, self.rng)?)
    }

    fn image_instruction(decision: &Decision) -> Result<Instruction, Abort> {
        match &decision.instruction {
            Some(instr) if decision.action.is_image_gen() && !instr.targets.is_empty() => Ok(instr.clone()),
            _ => Err(Abort::Discard(
                DiscardReason::FormatViolation,
                format!("expected an image_gen action with targets, got {}", decision.action.token()),
            )),
        }
    }

    /// Generate until the tool succeeds or the state's budget runs out.
    fn generate(&mut self, instruction: &Instruction, fail: Event) -> Result<Canvas, Abort> {
        let image_id = format!("{}-{:02}", self.prompt.id, self.log.iterations);
        loop {
            self.spend()?;
            let base = self.canvas.as_ref();
            match self.adapters.generator.generate(instruction, base, &image_id, self.rng)? {
                Some(canvas) => return Ok(canvas),
                None => self.fire(fail)?,
            }
        }
    }

    fn push_image(&mut self, reasoning: String, canvas: Canvas) {
        self.steps.push(ReasoningStep {
            index: self.steps.len() as u32,
            reasoning,
            action: Action::image_gen(),
            image: Some(canvas.image.clone()),
            passive_pass: None,
            active_gaps: Vec::new(),
        });
        self.canvas = Some(canvas);
        self.log.iterations += 1;
    }

    fn gate(&mut self, targets: Vec<String>) -> Result<(), Abort> {
        let mut checklist = Checklist::new(targets);
        let canvas = self.canvas.as_ref().expect("gate follows generation");
        let pass = passive_verify(canvas, &mut checklist, self.adapters.passive, self.rng)?;
        self.steps.last_mut().expect("image step").passive_pass = Some(pass);
        if pass {
            Ok(())
        } else {
            self.state = ControllerState::Failed;
            self.log.path.push(ControllerState::Failed);
            let missed: Vec<_> = checklist
                .items()
                .iter()
                .zip(checklist.satisfied())
                .filter(|(_, &s)| !s)
                .map(|(i, _)| i.as_str())
                .collect();
            Err(Abort::Discard(DiscardReason::PassiveFailure, format!("checklist failed: {}", missed.join(", "))))
        }
    }

    fn check_gaps(&mut self) -> Result<(), Abort> {
        let canvas = self.canvas.as_ref().expect("canvas present");
        self.gaps = active_verify(canvas, self.prompt, self.adapters.active, self.rng)?.gaps;
        self.steps.last_mut().expect("image step").active_gaps = self.gaps.clone();
        Ok(())
    }

    fn drive(&mut self) -> Result<Trajectory, Abort> {
        use ControllerState::*;
        self.budget.enter(GenerateBaseImage);
        loop {
            match self.state {
                GenerateBaseImage => {
                    let decision = self.decide()?;
                    let instr = Self::image_instruction(&decision)?;
                    let canvas = self.generate(&instr, Event::GenFail)?;
                    self.push_image(decision.reasoning, canvas);
                    self.fire(Event::GenOk)?;
                    self.targets = instr.targets;
                }
                Inspect => {
                    self.spend()?;
                    let targets = std::mem::take(&mut self.targets);
                    self.gate(targets)?;
                    self.check_gaps()?;
                    self.fire(if self.gaps.is_empty() { Event::GenOk } else { Event::NeedsEdit })?;
                }
                EditRefine => {
                    if self.log.iterations >= self.config.max_iterations {
                        self.fire(Event::BudgetExhausted)?;
                        return Err(Abort::Discard(
                            DiscardReason::Budget,
                            format!("iteration cap {} reached", self.config.max_iterations),
                        ));
                    }
                    let decision = self.decide()?;
                    let instr = Self::image_instruction(&decision)?;
                    let canvas = self.generate(&instr, Event::EditFail)?;
                    self.push_image(decision.reasoning, canvas);
                    self.gate(instr.targets.clone())?;
                    self.gaps.retain(|g| !instr.targets.contains(g));
                    self.fire(Event::EditOk)?;
                }
                Validate => {
                    self.spend()?;
                    match self.config.active_verify {
                        ActiveVerifyMode::PlanExhausted if !self.gaps.is_empty() => {
                            self.steps.last_mut().expect("image step").active_gaps = self.gaps.clone();
                        }
                        _ => self.check_gaps()?,
                    }
                    self.fire(if self.gaps.is_empty() { Event::ValidateOk } else { Event::ValidatePartial })?;
                }
                Finalize => {
                    let decision = self.decide()?;
                    if !decision.action.is_terminate() {
                        return Err(Abort::Discard(
                            DiscardReason::FormatViolation,
                            format!("planner answered {} after validation passed", decision.action.token()),
                        ));
                    }
                    self.steps.push(ReasoningStep {
                        index: self.steps.len() as u32,
                        reasoning: decision.reasoning,
                        action: Action::terminate(),
                        image: None,
                        passive_pass: None,
                        active_gaps: Vec::new(),
                    });
                    let mut traj = Trajectory::new(&self.prompt.id, &self.prompt.text);
                    traj.terminated = true;
                    traj.steps = std::mem::take(&mut self.steps);
                    let opts = ValidationOptions { max_iterations: self.config.max_iterations, require_passive_pass: true };
                    let report = validate_trajectory(&traj, opts);
                    if !report.is_valid() {
                        return Err(Abort::Discard(DiscardReason::FormatViolation, report.to_string()));
                    }
                    return Ok(traj);
                }
                Failed => unreachable!("failures leave the loop"),
            }
        }
    }
}

/// Run the closed loop for one prompt.
///
/// Returns a trajectory only if every image step passed its checklist, the
/// final canvas has no gaps and no budget ran out. Adapter faults end the
/// episode with `fail_mid` set.
pub fn run_episode(
    prompt: &PromptSpec,
    adapters: AgentAdapters<'_>,
    config: &EngineConfig,
    rng: &mut StreamRng,
) -> Result<EpisodeOutcome, ControllerError> {
    if config.max_iterations == 0 || config.max_iterations > MAX_ITERATIONS {
        return Err(ControllerError::InvalidConfig(format!(
            "max_iterations must be in 1..={MAX_ITERATIONS}, got {}",
            config.max_iterations
        )));
    }
    let mut run = Run {
        prompt,
        adapters,
        config,
        rng,
        state: ControllerState::GenerateBaseImage,
        budget: config.budget.clone(),
        log: EpisodeLog {
            prompt_id: prompt.id.clone(),
            path: vec![ControllerState::GenerateBaseImage],
            events: Vec::new(),
            peak_budget: BTreeMap::new(),
            iterations: 0,
            discard: None,
            fail_mid: false,
            message: None,
            judgments: None,
        },
        steps: Vec::new(),
        canvas: None,
        targets: Vec::new(),
        gaps: Vec::new(),
    };
    match run.drive() {
        Ok(traj) => Ok(EpisodeOutcome { trajectory: Some(traj), canvas: run.canvas, log: run.log }),
        Err(Abort::Bug(e)) => Err(e),
        Err(abort) => {
            let (reason, message, fail_mid) = match abort {
                Abort::Discard(r, m) => (r, m, false),
                Abort::FailMid(m) => (DiscardReason::FormatViolation, format!("FAIL(mid): {m}"), true),
                Abort::Bug(_) => unreachable!(),
            };
            if run.state != ControllerState::Failed {
                run.log.path.push(ControllerState::Failed);
            }
            run.log.discard = Some(reason);
            run.log.fail_mid = fail_mid;
            run.log.message = Some(message);
            Ok(EpisodeOutcome { trajectory: None, canvas: None, log: run.log })
        }
    }
}
