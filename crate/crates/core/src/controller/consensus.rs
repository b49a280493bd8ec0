use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adapters::{Canvas, Judge, PromptSpec, Slot};
use super::ControllerError;
use crate::rng::StreamRng;

/// A judge's verdict in terms of the underlying items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Candidate,
    Baseline,
    Tie,
}

impl Choice {
    /// Whether the verdict counts as the multi-step result being no worse.
    pub fn favours_candidate(self) -> bool {
        self != Choice::Baseline
    }
}

/// Show the two images in an order drawn from `rng` and map the judge's slot
/// back to the item it refers to.
pub fn blind_ab(
    candidate: &Canvas,
    baseline: &Canvas,
    judge: &dyn Judge,
    prompt: &PromptSpec,
    rng: &mut StreamRng,
) -> Result<Choice, ControllerError> {
    if candidate.image.id == baseline.image.id {
        return Err(ControllerError::SameItem(candidate.image.id.clone()));
    }
    let swapped: bool = rng.random();
    let (first, second) = if swapped { (baseline, candidate) } else { (candidate, baseline) };
    let slot = judge.prefer(first, second, prompt, rng)?;
    Ok(match (slot, swapped) {
        (Slot::Tie, _) => Choice::Tie,
        (Slot::First, false) | (Slot::Second, true) => Choice::Candidate,
        (Slot::First, true) | (Slot::Second, false) => Choice::Baseline,
    })
}

/// Keep a trajectory only if both judges favour it.
pub fn consensus_filter(first: Option<bool>, second: Option<bool>) -> Result<bool, ControllerError> {
    match (first, second) {
        (Some(a), Some(b)) => Ok(a && b),
        (None, _) => Err(ControllerError::MissingJudgment { judge: 1 }),
        (_, None) => Err(ControllerError::MissingJudgment { judge: 2 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::adapters::AdapterError;
    use crate::rng::seeded;
    use crate::trajectory::{ImageRef, ImageSource};

    struct AlwaysFirst;

    impl Judge for AlwaysFirst {
        fn prefer(&self, _: &Canvas, _: &Canvas, _: &PromptSpec, _: &mut StreamRng) -> Result<Slot, AdapterError> {
            Ok(Slot::First)
        }
    }

    struct ByContent;

    impl Judge for ByContent {
        fn prefer(&self, a: &Canvas, b: &Canvas, _: &PromptSpec, _: &mut StreamRng) -> Result<Slot, AdapterError> {
            Ok(if a.satisfied.len() >= b.satisfied.len() { Slot::First } else { Slot::Second })
        }
    }

    fn canvas(id: &str, items: &[&str]) -> Canvas {
        Canvas {
            image: ImageRef::simulated(id, ImageSource::Generated),
            satisfied: items.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn prompt() -> PromptSpec {
        PromptSpec { id: "p".into(), text: "a, b".into(), requirements: vec!["a".into(), "b".into()] }
    }

    #[test]
    fn and_rule() {
        assert!(consensus_filter(Some(true), Some(true)).unwrap());
        assert!(!consensus_filter(Some(true), Some(false)).unwrap());
        assert!(consensus_filter(None, Some(true)).is_err());
        assert!(consensus_filter(Some(true), None).is_err());
    }

    #[test]
    fn position_bias_is_randomised_away() {
        let (c, b) = (canvas("c", &[]), canvas("b", &[]));
        let mut rng = seeded(5);
        let n = 10_000;
        let wins = (0..n).filter(|_| blind_ab(&c, &b, &AlwaysFirst, &prompt(), &mut rng).unwrap() == Choice::Candidate).count();
        assert!((wins as f64 / n as f64 - 0.5).abs() < 0.02, "{wins}");
    }

    #[test]
    fn content_judge_ignores_order() {
        let (c, b) = (canvas("c", &["a", "b"]), canvas("b", &["a"]));
        let mut rng = seeded(6);
        assert!((0..200).all(|_| blind_ab(&c, &b, &ByContent, &prompt(), &mut rng).unwrap() == Choice::Candidate));
        assert!(blind_ab(&c, &c, &ByContent, &prompt(), &mut rng).is_err());
    }

    #[test]
    fn reproducible_choices() {
        let (c, b) = (canvas("c", &[]), canvas("b", &[]));
        let run = |seed| {
            let mut rng = seeded(seed);
            (0..64).map(|_| blind_ab(&c, &b, &AlwaysFirst, &prompt(), &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }
}
