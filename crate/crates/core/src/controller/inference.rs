use serde::Serialize;

use super::adapters::{Canvas, Generator, Planner, PlannerContext, PromptSpec};
use super::ControllerError;
use crate::rng::StreamRng;
use crate::trajectory::{Action, ImageRef, ReasoningStep, Trajectory};

#[derive(Debug, Clone, Serialize)]
pub struct InferenceOutcome {
    /// The canvas when the policy terminated; `None` if it never generated.
    pub final_image: Option<ImageRef>,
    pub trajectory: Trajectory,
}

pub const CAP_REASONING: &str = "Iteration limit reached; returning the current canvas.";

/// Alternate reasoning and generation until the planner terminates or
/// `max_iterations` images exist, then return the current canvas.
pub fn run_inference(
    prompt: &PromptSpec,
    planner: &dyn Planner,
    generator: &dyn Generator,
    max_iterations: usize,
    rng: &mut StreamRng,
) -> Result<InferenceOutcome, ControllerError> {
    if max_iterations == 0 {
        return Err(ControllerError::InvalidConfig("max_iterations must be at least 1".into()));
    }
    let mut traj = Trajectory::new(&prompt.id, &prompt.text);
    let mut canvas: Option<Canvas> = None;
    let mut images = 0;
    let terminate = |traj: &mut Trajectory, reasoning: String| {
        traj.steps.push(ReasoningStep {
            index: traj.steps.len() as u32,
            reasoning,
            action: Action::terminate(),
            image: None,
            passive_pass: None,
            active_gaps: Vec::new(),
        });
        traj.terminated = true;
    };
    loop {
        if images == max_iterations {
            terminate(&mut traj, CAP_REASONING.into());
            break;
        }
        let ctx = PlannerContext { prompt, canvas: canvas.as_ref(), gaps: None, history: &traj.steps };
        let decision = planner.decide(&ctx, rng)?;
        if decision.action.is_terminate() {
            terminate(&mut traj, decision.reasoning);
            break;
        }
        if !decision.action.is_image_gen() {
            return Err(ControllerError::UnsupportedAction(decision.action.token()));
        }
        let instr = decision
            .instruction
            .ok_or_else(|| ControllerError::UnsupportedAction("image_gen without an instruction".into()))?;
        let image_id = format!("{}-{:02}", prompt.id, images);
        let next = generator
            .generate(&instr, canvas.as_ref(), &image_id, rng)?
            .ok_or_else(|| ControllerError::Generator(format!("generation failed at iteration {images}")))?;
        traj.steps.push(ReasoningStep {
            index: traj.steps.len() as u32,
            reasoning: decision.reasoning,
            action: Action::image_gen(),
            image: Some(next.image.clone()),
            passive_pass: None,
            active_gaps: Vec::new(),
        });
        canvas = Some(next);
        images += 1;
    }
    Ok(InferenceOutcome { final_image: canvas.map(|c| c.image), trajectory: traj })
}
