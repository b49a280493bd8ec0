//! Deterministic simulated agents. Every draw comes from the caller's
//! per-episode stream, so results depend only on (seed, item index).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adapters::{
    ActiveVerifier, AdapterError, AgentAdapters, Canvas, Decision, Generator, Instruction, Judge, PassiveVerifier,
    Planner, PlannerContext, PromptSpec, Slot,
};
use super::ControllerError;
use crate::rng::StreamRng;
use crate::trajectory::{Action, ImageRef, ImageSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimEnvConfig {
    /// Chance that the generator realises each targeted requirement.
    pub per_item_success_prob: f64,
    /// The planner holds back `k ~ U{min_deferred..=max_deferred}` requirements
    /// from the base image and adds them by editing.
    pub min_deferred: usize,
    pub max_deferred: usize,
    /// Chance that a judge reports the true preference.
    pub judge_agreement_prob: f64,
    /// Chance that a generation call fails transiently.
    pub tool_fault_prob: f64,
    pub master_seed: u64,
}

impl Default for SimEnvConfig {
    fn default() -> Self {
        SimEnvConfig {
            per_item_success_prob: 0.8,
            min_deferred: 0,
            max_deferred: 3,
            judge_agreement_prob: 0.8,
            tool_fault_prob: 0.0,
            master_seed: 0,
        }
    }
}

impl SimEnvConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        for (name, p) in [
            ("per_item_success_prob", self.per_item_success_prob),
            ("judge_agreement_prob", self.judge_agreement_prob),
            ("tool_fault_prob", self.tool_fault_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ControllerError::InvalidConfig(format!("{name} = {p} is not a probability")));
            }
        }
        if self.min_deferred > self.max_deferred {
            return Err(ControllerError::InvalidConfig("min_deferred exceeds max_deferred".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimEnv {
    config: SimEnvConfig,
    judge: SimJudge,
}

impl SimEnv {
    pub fn new(config: SimEnvConfig) -> Result<Self, ControllerError> {
        config.validate()?;
        let judge = SimJudge { agreement_prob: config.judge_agreement_prob };
        Ok(SimEnv { config, judge })
    }

    pub fn config(&self) -> &SimEnvConfig {
        &self.config
    }

    pub fn adapters(&self) -> AgentAdapters<'_> {
        AgentAdapters { planner: self, generator: self, passive: self, active: self, judges: [&self.judge, &self.judge] }
    }
}

fn unmet<'a>(prompt: &'a PromptSpec, canvas: &Canvas) -> Vec<&'a String> {
    prompt.requirements.iter().filter(|r| !canvas.satisfied.contains(*r)).collect()
}

impl Planner for SimEnv {
    fn decide(&self, ctx: &PlannerContext<'_>, rng: &mut StreamRng) -> Result<Decision, AdapterError> {
        let reqs = &ctx.prompt.requirements;
        if reqs.is_empty() {
            return Err(AdapterError(format!("prompt {} has no requirements", ctx.prompt.id)));
        }
        let Some(canvas) = ctx.canvas else {
            let deferred = rng.random_range(self.config.min_deferred..=self.config.max_deferred);
            let base = reqs.len() - deferred.min(reqs.len() - 1);
            let targets = reqs[..base].to_vec();
            return Ok(Decision {
                reasoning: format!("Compose the base scene with: {}.", targets.join(", ")),
                action: Action::image_gen(),
                instruction: Some(Instruction { text: ctx.prompt.text.clone(), targets }),
            });
        };
        let gaps: Vec<String> = match ctx.gaps {
            Some(g) => g.to_vec(),
            None => unmet(ctx.prompt, canvas).into_iter().cloned().collect(),
        };
        match gaps.first() {
            None => Ok(Decision {
                reasoning: "The canvas satisfies every requirement.".into(),
                action: Action::terminate(),
                instruction: None,
            }),
            Some(gap) => Ok(Decision {
                reasoning: format!("Missing: {gap}. Edit the canvas to add it."),
                action: Action::image_gen(),
                instruction: Some(Instruction { text: format!("add {gap}"), targets: vec![gap.clone()] }),
            }),
        }
    }
}

impl Generator for SimEnv {
    fn generate(
        &self,
        instruction: &Instruction,
        base: Option<&Canvas>,
        image_id: &str,
        rng: &mut StreamRng,
    ) -> Result<Option<Canvas>, AdapterError> {
        if self.config.tool_fault_prob > 0.0 && rng.random::<f64>() < self.config.tool_fault_prob {
            return Ok(None);
        }
        let mut satisfied = base.map(|c| c.satisfied.clone()).unwrap_or_default();
        for target in &instruction.targets {
            if rng.random::<f64>() < self.config.per_item_success_prob {
                satisfied.insert(target.clone());
            }
        }
        let source = if base.is_some() { ImageSource::Edited } else { ImageSource::Generated };
        Ok(Some(Canvas { image: ImageRef::simulated(image_id, source), satisfied }))
    }
}

impl PassiveVerifier for SimEnv {
    fn check(&self, canvas: &Canvas, items: &[String], _: &mut StreamRng) -> Result<Vec<bool>, AdapterError> {
        Ok(items.iter().map(|i| canvas.satisfied.contains(i)).collect())
    }
}

impl ActiveVerifier for SimEnv {
    fn gaps(&self, canvas: &Canvas, prompt: &PromptSpec, _: &mut StreamRng) -> Result<Vec<String>, AdapterError> {
        Ok(unmet(prompt, canvas).into_iter().cloned().collect())
    }
}

/// Prefers the image satisfying more requirements; reports that preference
/// with probability `agreement_prob` and the opposite otherwise. A wrong call
/// on a tie picks a slot at random.
#[derive(Debug, Clone, Copy)]
pub struct SimJudge {
    pub agreement_prob: f64,
}

impl Judge for SimJudge {
    fn prefer(&self, first: &Canvas, second: &Canvas, prompt: &PromptSpec, rng: &mut StreamRng)
        -> Result<Slot, AdapterError> {
        let score = |c: &Canvas| prompt.requirements.iter().filter(|r| c.satisfied.contains(*r)).count();
        let truth = match score(first).cmp(&score(second)) {
            std::cmp::Ordering::Greater => Slot::First,
            std::cmp::Ordering::Less => Slot::Second,
            std::cmp::Ordering::Equal => Slot::Tie,
        };
        if rng.random::<f64>() < self.agreement_prob {
            return Ok(truth);
        }
        Ok(match truth {
            Slot::First => Slot::Second,
            Slot::Second => Slot::First,
            Slot::Tie if rng.random::<bool>() => Slot::First,
            Slot::Tie => Slot::Second,
        })
    }
}

/// Parse a prompt file. Plain lines list requirements separated by `,` or `;`
/// and get ids `p000000`, `p000001`, ...; lines starting with `{` are JSON
/// [`PromptSpec`] objects. Blank lines and `#` comments are skipped.
pub fn parse_prompts(text: &str) -> Result<Vec<PromptSpec>, ControllerError> {
    let mut out: Vec<PromptSpec> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let spec = if line.starts_with('{') {
            serde_json::from_str::<PromptSpec>(line)
                .map_err(|e| ControllerError::Prompt { line: n + 1, message: e.to_string() })?
        } else {
            let requirements: Vec<String> =
                line.split([',', ';']).map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
            PromptSpec { id: format!("p{:06}", out.len()), text: line.to_string(), requirements }
        };
        if spec.requirements.is_empty() {
            return Err(ControllerError::Prompt { line: n + 1, message: "no requirements".into() });
        }
        if out.iter().any(|p| p.id == spec.id) {
            return Err(ControllerError::Prompt { line: n + 1, message: format!("duplicate prompt id {:?}", spec.id) });
        }
        out.push(spec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_file() {
        let text = "# demo\na red cube, a blue sphere; sunset\n\n{\"id\":\"x\",\"text\":\"t\",\"requirements\":[\"a\"]}\n";
        let prompts = parse_prompts(text).unwrap();
        assert_eq!(prompts[0].id, "p000000");
        assert_eq!(prompts[0].requirements, vec!["a red cube", "a blue sphere", "sunset"]);
        assert_eq!(prompts[1].id, "x");
        assert!(parse_prompts(" , ;\n").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SimEnv::new(SimEnvConfig { per_item_success_prob: 1.5, ..Default::default() }).is_err());
        assert!(SimEnv::new(SimEnvConfig { min_deferred: 3, max_deferred: 1, ..Default::default() }).is_err());
    }
}
