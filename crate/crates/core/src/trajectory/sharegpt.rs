//! ShareGPT export.
//!
//! The prompt becomes the single human turn. Every step becomes one `gpt`
//! turn: the reasoning text, a newline, then either `<IMG_GEN_n>` (n counts
//! images from 1) or the step's action token.

use serde::{Deserialize, Serialize};

use super::{ensure_valid, Action, ImageRef, ReasoningStep, Trajectory, TrajectoryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "human")]
    Human,
    #[serde(rename = "gpt")]
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub from: Role,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareGptRecord {
    pub conversations: Vec<Turn>,
    pub images: Vec<ImageRef>,
}

impl ShareGptRecord {
    /// `<IMG_GEN_n>` placeholders in the order they appear.
    pub fn image_tokens(&self) -> Vec<String> {
        self.conversations
            .iter()
            .filter(|t| t.from == Role::Assistant)
            .filter_map(|t| t.value.rsplit_once('\n').map(|(_, tail)| tail))
            .filter(|tail| image_token_index(tail).is_some())
            .map(str::to_string)
            .collect()
    }
}

pub fn image_token(n: usize) -> String {
    format!("<IMG_GEN_{n}>")
}

fn image_token_index(token: &str) -> Option<usize> {
    token.strip_prefix("<IMG_GEN_")?.strip_suffix('>')?.parse().ok()
}

pub fn export_sharegpt(traj: &Trajectory) -> Result<ShareGptRecord, TrajectoryError> {
    ensure_valid(traj)?;
    let mut conversations = vec![Turn { from: Role::Human, value: traj.prompt.clone() }];
    let mut images = Vec::new();
    for step in &traj.steps {
        let tail = match &step.image {
            Some(image) => {
                images.push(image.clone());
                image_token(images.len())
            }
            None => step.action.token(),
        };
        conversations.push(Turn {
            from: Role::Assistant,
            value: format!("{}\n{}", step.reasoning, tail),
        });
    }
    Ok(ShareGptRecord { conversations, images })
}

/// Rebuild the trajectory skeleton (prompt, reasoning, actions, image order)
/// from an exported record. Ids, meta and verification fields are not carried
/// by the format and come back empty.
pub fn parse_record(record: &ShareGptRecord) -> Result<Trajectory, TrajectoryError> {
    let bad = |msg: String| TrajectoryError::MalformedRecord(msg);
    let (first, rest) = record
        .conversations
        .split_first()
        .ok_or_else(|| bad("no conversation turns".into()))?;
    if first.from != Role::Human {
        return Err(bad("first turn must be human".into()));
    }

    let mut traj = Trajectory::new("", first.value.clone());
    let mut next_image = 0usize;
    for (i, turn) in rest.iter().enumerate() {
        if turn.from != Role::Assistant {
            return Err(bad(format!("turn {} is not an assistant turn", i + 1)));
        }
        let (reasoning, tail) = turn
            .value
            .rsplit_once('\n')
            .ok_or_else(|| bad(format!("turn {} has no action line", i + 1)))?;
        let (action, image) = match image_token_index(tail) {
            Some(n) => {
                if n != next_image + 1 {
                    return Err(bad(format!("expected {} but found {tail}", image_token(next_image + 1))));
                }
                let image = record
                    .images
                    .get(next_image)
                    .cloned()
                    .ok_or_else(|| bad(format!("{tail} has no matching image entry")))?;
                next_image += 1;
                (Action::image_gen(), Some(image))
            }
            None => {
                let action = Action::from_token(tail)
                    .ok_or_else(|| bad(format!("unrecognised action line {tail:?}")))?;
                (action, None)
            }
        };
        traj.steps.push(ReasoningStep {
            index: i as u32,
            reasoning: reasoning.to_string(),
            action,
            image,
            passive_pass: None,
            active_gaps: Vec::new(),
        });
    }
    if next_image != record.images.len() {
        return Err(bad(format!(
            "{} image entries but {} image tokens",
            record.images.len(),
            next_image
        )));
    }
    traj.terminated = traj.steps.last().is_some_and(|s| s.action.is_terminate());
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::trajectory;
    use super::*;

    #[test]
    fn two_images_give_contiguous_tokens() {
        let record = export_sharegpt(&trajectory("s", 2)).unwrap();
        assert_eq!(record.image_tokens(), vec!["<IMG_GEN_1>", "<IMG_GEN_2>"]);
        assert_eq!(record.images.len(), 2);
        assert_eq!(record.conversations[0].value, "prompt for s");
        assert_eq!(record.conversations[1].value, "reason 0\n<IMG_GEN_1>");
        assert_eq!(record.conversations[3].value, "done\n<|terminate|>");
    }

    #[test]
    fn no_images_no_tokens() {
        let record = export_sharegpt(&trajectory("s", 0)).unwrap();
        assert!(record.image_tokens().is_empty());
        assert!(record.images.is_empty());
    }

    #[test]
    fn wire_roles() {
        let record = export_sharegpt(&trajectory("s", 1)).unwrap();
        let json = serde_json::to_string(&record).unwrap();
        assert!(json.starts_with(r#"{"conversations":[{"from":"human","value":"prompt for s"},{"from":"gpt""#));
    }

    #[test]
    fn round_trip_skeleton() {
        let traj = trajectory("s", 3);
        let back = parse_record(&export_sharegpt(&traj).unwrap()).unwrap();
        assert_eq!(back.prompt, traj.prompt);
        assert!(back.terminated);
        assert_eq!(back.steps.len(), traj.steps.len());
        for (a, b) in back.steps.iter().zip(&traj.steps) {
            assert_eq!(a.reasoning, b.reasoning);
            assert_eq!(a.action, b.action);
            assert_eq!(a.image, b.image);
        }
    }

    #[test]
    fn multiline_reasoning_survives() {
        let mut traj = trajectory("s", 1);
        traj.steps[0].reasoning = "line one\nline two".into();
        let back = parse_record(&export_sharegpt(&traj).unwrap()).unwrap();
        assert_eq!(back.steps[0].reasoning, "line one\nline two");
    }

    #[test]
    fn rejects_gap_in_numbering() {
        let mut record = export_sharegpt(&trajectory("s", 2)).unwrap();
        record.conversations[2].value = "reason 1\n<IMG_GEN_3>".into();
        assert!(parse_record(&record).is_err());
    }
}
