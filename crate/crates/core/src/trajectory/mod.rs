//! Interleaved reasoning trajectories and their training-sample views.
//!
//! A [`Trajectory`] is the ordered record `{(r_0, x_0), …, (r_T, x_T)}` of
//! reasoning texts and generated images under one prompt, plus the action
//! emitted at each step and the verification results that gated it. Images
//! are carried as references with a content digest; pixels never enter here.

mod jsonl;
mod sharegpt;
mod truncate;

pub use jsonl::{parse_trajectory_jsonl, serialize_jsonl};
pub use sharegpt::{export_sharegpt, parse_record, Role, ShareGptRecord, Turn};
pub use truncate::{context_images, expand_all, truncate_at, ContextItem, TruncatedSample};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Iteration cap for closed-loop generation.
pub const MAX_ITERATIONS: usize = 8;

pub const IMAGE_GEN_TOKEN: &str = "<|image_gen|>";
pub const TERMINATE_TOKEN: &str = "<|terminate|>";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrajectoryError {
    #[error("step {t} out of range: trajectory has {images} image-bearing steps")]
    OutOfRange { t: usize, images: usize },
    #[error("invalid trajectory {id}: {violations}")]
    Invalid { id: String, violations: String },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("duplicate trajectory id {0:?}")]
    DuplicateId(String),
    #[error("malformed ShareGPT record: {0}")]
    MalformedRecord(String),
}

/// 32-byte content digest, hex-encoded lowercase on the wire.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash(pub [u8; 32]);

impl ContentHash {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        ContentHash(*blake3::hash(bytes).as_bytes())
    }

    /// Placeholder digest for simulated images: the hash of the id string.
    pub fn of_id(id: &str) -> Self {
        Self::of_bytes(id.as_bytes())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentHash({})", self.to_hex())
    }
}

impl Serialize for ContentHash {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ContentHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        if text.len() != 64 || text.chars().any(|c| c.is_ascii_uppercase()) {
            return Err(serde::de::Error::custom(
                "content_hash must be 64 lowercase hex characters",
            ));
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(&text, &mut out).map_err(serde::de::Error::custom)?;
        Ok(ContentHash(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageSource {
    Generated,
    Edited,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub id: String,
    pub source: ImageSource,
    pub content_hash: ContentHash,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uri: Option<String>,
}

impl ImageRef {
    /// Simulated image: digest taken over the id.
    pub fn simulated(id: impl Into<String>, source: ImageSource) -> Self {
        let id = id.into();
        ImageRef {
            content_hash: ContentHash::of_id(&id),
            id,
            source,
            uri: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionKind {
    ImageGen,
    Terminate,
    Tool(String),
}

/// A discrete action signal. Construct through [`Action::image_gen`],
/// [`Action::terminate`] or [`Action::tool`] so the token is always exact.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    kind: ActionKind,
}

impl Action {
    pub fn image_gen() -> Self {
        Action { kind: ActionKind::ImageGen }
    }

    pub fn terminate() -> Self {
        Action { kind: ActionKind::Terminate }
    }

    pub fn tool(name: impl Into<String>) -> Self {
        Action { kind: ActionKind::Tool(name.into()) }
    }

    pub fn kind(&self) -> &ActionKind {
        &self.kind
    }

    pub fn is_image_gen(&self) -> bool {
        self.kind == ActionKind::ImageGen
    }

    pub fn is_terminate(&self) -> bool {
        self.kind == ActionKind::Terminate
    }

    pub fn token(&self) -> String {
        match &self.kind {
            ActionKind::ImageGen => IMAGE_GEN_TOKEN.to_string(),
            ActionKind::Terminate => TERMINATE_TOKEN.to_string(),
            ActionKind::Tool(name) => format!("<|tool:{name}|>"),
        }
    }

    fn kind_label(&self) -> String {
        match &self.kind {
            ActionKind::ImageGen => "image_gen".into(),
            ActionKind::Terminate => "terminate".into(),
            ActionKind::Tool(name) => format!("tool:{name}"),
        }
    }

    /// Inverse of [`Action::token`].
    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            IMAGE_GEN_TOKEN => Some(Action::image_gen()),
            TERMINATE_TOKEN => Some(Action::terminate()),
            other => other
                .strip_prefix("<|tool:")
                .and_then(|rest| rest.strip_suffix("|>"))
                .filter(|name| !name.is_empty())
                .map(Action::tool),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct WireAction {
    kind: String,
    token: String,
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireAction { kind: self.kind_label(), token: self.token() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = WireAction::deserialize(d)?;
        let action = match wire.kind.as_str() {
            "image_gen" => Action::image_gen(),
            "terminate" => Action::terminate(),
            other => match other.strip_prefix("tool:") {
                Some(name) if !name.is_empty() => Action::tool(name),
                _ => {
                    return Err(serde::de::Error::custom(format!(
                        "unknown action kind {other:?}"
                    )))
                }
            },
        };
        if action.token() != wire.token {
            return Err(serde::de::Error::custom(format!(
                "action token {:?} does not match kind {:?}",
                wire.token, wire.kind
            )));
        }
        Ok(action)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningStep {
    pub index: u32,
    pub reasoning: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passive_pass: Option<bool>,
    #[serde(default)]
    pub active_gaps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub prompt: String,
    pub terminated: bool,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub steps: Vec<ReasoningStep>,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, prompt: impl Into<String>) -> Self {
        Trajectory {
            id: id.into(),
            prompt: prompt.into(),
            terminated: false,
            meta: BTreeMap::new(),
            steps: Vec::new(),
        }
    }

    /// Steps that carry an image, in order.
    pub fn image_steps(&self) -> impl Iterator<Item = &ReasoningStep> {
        self.steps.iter().filter(|s| s.image.is_some())
    }

    pub fn image_count(&self) -> usize {
        self.image_steps().count()
    }

    pub fn final_image(&self) -> Option<&ImageRef> {
        self.steps.iter().rev().find_map(|s| s.image.as_ref())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    pub max_iterations: usize,
    /// Retained datasets require every image step to have passed the gate.
    pub require_passive_pass: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { max_iterations: MAX_ITERATIONS, require_passive_pass: false }
    }
}

impl ValidationOptions {
    pub fn retained() -> Self {
        ValidationOptions { require_passive_pass: true, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TerminatedWithoutTerminateAction,
    ImagePresenceMismatch { step: u32 },
    NonIncreasingIndex { position: usize, index: u32 },
    DuplicateImageId { id: String },
    PassiveNotPassed { step: u32 },
    IterationBudget { images: usize, max: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TerminatedWithoutTerminateAction => {
                f.write_str("terminated but last action is not terminate")
            }
            Violation::ImagePresenceMismatch { step } => {
                write!(f, "step {step}: image presence disagrees with action")
            }
            Violation::NonIncreasingIndex { position, index } => {
                write!(f, "step at position {position} has non-increasing index {index}")
            }
            Violation::DuplicateImageId { id } => write!(f, "duplicate image id {id:?}"),
            Violation::PassiveNotPassed { step } => {
                write!(f, "step {step}: image not passed by passive verification")
            }
            Violation::IterationBudget { images, max } => {
                write!(f, "iteration budget: {images} image steps exceed {max}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_trajectory(traj: &Trajectory, opts: ValidationOptions) -> ValidationReport {
    let mut violations = Vec::new();

    if traj.terminated && !traj.steps.last().is_some_and(|s| s.action.is_terminate()) {
        violations.push(Violation::TerminatedWithoutTerminateAction);
    }

    let mut seen_ids = BTreeSet::new();
    let mut previous: Option<u32> = None;
    for (position, step) in traj.steps.iter().enumerate() {
        if step.image.is_some() != step.action.is_image_gen() {
            violations.push(Violation::ImagePresenceMismatch { step: step.index });
        }
        if previous.is_some_and(|p| step.index <= p) {
            violations.push(Violation::NonIncreasingIndex { position, index: step.index });
        }
        previous = Some(step.index);
        if let Some(image) = &step.image {
            if !seen_ids.insert(image.id.as_str()) {
                violations.push(Violation::DuplicateImageId { id: image.id.clone() });
            }
            if opts.require_passive_pass && step.passive_pass != Some(true) {
                violations.push(Violation::PassiveNotPassed { step: step.index });
            }
        }
    }

    let images = traj.image_count();
    if images > opts.max_iterations {
        violations.push(Violation::IterationBudget { images, max: opts.max_iterations });
    }
    ValidationReport { violations }
}

pub(crate) fn ensure_valid(traj: &Trajectory) -> Result<(), TrajectoryError> {
    let report = validate_trajectory(traj, ValidationOptions::default());
    if report.is_valid() {
        Ok(())
    } else {
        Err(TrajectoryError::Invalid { id: traj.id.clone(), violations: report.to_string() })
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn tokens_are_exact() {
        assert_eq!(Action::image_gen().token(), "<|image_gen|>");
        assert_eq!(Action::terminate().token(), "<|terminate|>");
        assert_eq!(Action::from_token("<|tool:crop|>"), Some(Action::tool("crop")));
        assert_eq!(Action::from_token("<|image-gen|>"), None);
    }

    #[test]
    fn terminated_with_image_gen_last_is_one_violation() {
        let mut t = trajectory("a", 2);
        t.steps.pop();
        let report = validate_trajectory(&t, ValidationOptions::default());
        assert_eq!(report.violations, vec![Violation::TerminatedWithoutTerminateAction]);
    }

    #[test]
    fn empty_unterminated_is_valid() {
        let t = Trajectory::new("e", "p");
        assert!(validate_trajectory(&t, ValidationOptions::default()).is_valid());
    }

    #[test]
    fn nine_images_exceed_budget() {
        let t = trajectory("n", 9);
        let report = validate_trajectory(&t, ValidationOptions::default());
        assert_eq!(report.violations, vec![Violation::IterationBudget { images: 9, max: 8 }]);
    }

    #[test]
    fn image_without_image_gen_and_index_order() {
        let mut t = trajectory("m", 2);
        t.steps[1].action = Action::tool("crop");
        t.steps[1].index = 0;
        let report = validate_trajectory(&t, ValidationOptions::default());
        assert_eq!(
            report.violations,
            vec![
                Violation::ImagePresenceMismatch { step: 0 },
                Violation::NonIncreasingIndex { position: 1, index: 0 },
            ]
        );
    }

    #[test]
    fn retained_requires_passive_pass() {
        let mut t = trajectory("r", 2);
        t.steps[1].passive_pass = Some(false);
        assert!(validate_trajectory(&t, ValidationOptions::default()).is_valid());
        let report = validate_trajectory(&t, ValidationOptions::retained());
        assert_eq!(report.violations, vec![Violation::PassiveNotPassed { step: 1 }]);
    }

    #[test]
    fn hash_wire_format_is_lowercase_hex() {
        let h = ContentHash::of_id("img");
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(json.len(), 66);
        assert_eq!(serde_json::from_str::<ContentHash>(&json).unwrap(), h);
        let upper = json.to_uppercase();
        assert!(serde_json::from_str::<ContentHash>(&upper).is_err());
    }

    #[test]
    fn action_wire_rejects_mismatched_token() {
        let bad = r#"{"kind":"image_gen","token":"<|terminate|>"}"#;
        assert!(serde_json::from_str::<Action>(bad).is_err());
        let good = r#"{"kind":"tool:crop","token":"<|tool:crop|>"}"#;
        assert_eq!(serde_json::from_str::<Action>(good).unwrap(), Action::tool("crop"));
    }
}
