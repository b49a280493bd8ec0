use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ControllerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerState {
    GenerateBaseImage,
    Inspect,
    EditRefine,
    Validate,
    Finalize,
    Failed,
}

impl ControllerState {
    pub const ALL: [ControllerState; 6] = [
        ControllerState::GenerateBaseImage,
        ControllerState::Inspect,
        ControllerState::EditRefine,
        ControllerState::Validate,
        ControllerState::Finalize,
        ControllerState::Failed,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, ControllerState::Finalize | ControllerState::Failed)
    }
}

impl fmt::Display for ControllerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ControllerState::GenerateBaseImage => "generate_base_image",
            ControllerState::Inspect => "inspect",
            ControllerState::EditRefine => "edit_refine",
            ControllerState::Validate => "validate",
            ControllerState::Finalize => "finalize",
            ControllerState::Failed => "failed",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    GenOk,
    GenFail,
    NeedsEdit,
    EditOk,
    EditFail,
    ValidateOk,
    ValidatePartial,
    BudgetExhausted,
}

/// The transition function of the controller.
///
/// `Inspect` moves to `Validate` on `GenOk`, meaning the inspected canvas
/// needs no edit. Failure events keep the state so the caller can retry
/// against its budget; `Failed` absorbs every event.
pub fn step_state(state: ControllerState, event: Event) -> Result<ControllerState, ControllerError> {
    use ControllerState::*;
    use Event::*;
    let next = match (state, event) {
        (Failed, _) => Failed,
        (Finalize, _) => return Err(ControllerError::IllegalTransition { state, event }),
        (_, BudgetExhausted) => Failed,
        (GenerateBaseImage, GenOk) => Inspect,
        (GenerateBaseImage, GenFail) => GenerateBaseImage,
        (Inspect, NeedsEdit) => EditRefine,
        (Inspect, GenOk) => Validate,
        (EditRefine, EditOk) => Validate,
        (EditRefine, EditFail) => EditRefine,
        (Validate, ValidatePartial) => EditRefine,
        (Validate, ValidateOk) => Finalize,
        _ => return Err(ControllerError::IllegalTransition { state, event }),
    };
    Ok(next)
}

/// Per-state attempt limits. Usage resets on every entry to a state and each
/// tool attempt made in that state costs one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryBudget {
    limits: BTreeMap<ControllerState, u32>,
    #[serde(skip)]
    used: BTreeMap<ControllerState, u32>,
}

pub const DEFAULT_RETRY_LIMIT: u32 = 2;

impl Default for RetryBudget {
    fn default() -> Self {
        Self::uniform(DEFAULT_RETRY_LIMIT)
    }
}

impl RetryBudget {
    pub fn uniform(limit: u32) -> Self {
        RetryBudget {
            limits: ControllerState::ALL.iter().filter(|s| !s.is_terminal()).map(|&s| (s, limit)).collect(),
            used: BTreeMap::new(),
        }
    }

    pub fn with_limit(mut self, state: ControllerState, limit: u32) -> Self {
        self.limits.insert(state, limit);
        self
    }

    pub fn limit(&self, state: ControllerState) -> u32 {
        self.limits.get(&state).copied().unwrap_or(0)
    }

    pub fn used(&self, state: ControllerState) -> u32 {
        self.used.get(&state).copied().unwrap_or(0)
    }

    pub fn limits(&self) -> &BTreeMap<ControllerState, u32> {
        &self.limits
    }

    pub fn enter(&mut self, state: ControllerState) {
        self.used.insert(state, 0);
    }

    /// Spend one unit in `state`; false when the state's limit is reached.
    pub fn try_consume(&mut self, state: ControllerState) -> bool {
        let used = self.used.entry(state).or_insert(0);
        if *used < self.limits.get(&state).copied().unwrap_or(0) {
            *used += 1;
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ControllerState::*;
    use Event::*;

    const EVENTS: [Event; 8] =
        [GenOk, GenFail, NeedsEdit, EditOk, EditFail, ValidateOk, ValidatePartial, BudgetExhausted];

    #[test]
    fn happy_path() {
        assert_eq!(step_state(GenerateBaseImage, GenOk).unwrap(), Inspect);
        assert_eq!(step_state(Inspect, NeedsEdit).unwrap(), EditRefine);
        assert_eq!(step_state(EditRefine, EditOk).unwrap(), Validate);
        assert_eq!(step_state(Validate, ValidatePartial).unwrap(), EditRefine);
        assert_eq!(step_state(Validate, ValidateOk).unwrap(), Finalize);
        assert_eq!(step_state(Inspect, GenOk).unwrap(), Validate);
    }

    #[test]
    fn terminal_states() {
        for e in EVENTS {
            assert!(step_state(Finalize, e).is_err());
            assert_eq!(step_state(Failed, e).unwrap(), Failed);
        }
        for s in [GenerateBaseImage, Inspect, EditRefine, Validate] {
            assert_eq!(step_state(s, BudgetExhausted).unwrap(), Failed);
        }
        assert!(step_state(Validate, EditOk).is_err());
        assert!(step_state(GenerateBaseImage, ValidateOk).is_err());
    }

    #[test]
    fn budget_resets_per_visit() {
        let mut b = RetryBudget::uniform(2);
        b.enter(EditRefine);
        assert!(b.try_consume(EditRefine));
        assert!(b.try_consume(EditRefine));
        assert!(!b.try_consume(EditRefine));
        assert_eq!(b.used(EditRefine), 2);
        b.enter(EditRefine);
        assert!(b.try_consume(EditRefine));
        assert!(!RetryBudget::uniform(0).try_consume(GenerateBaseImage));
    }
}
