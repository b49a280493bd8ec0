use serde::{Deserialize, Serialize};

use super::{ensure_valid, ImageRef, Trajectory, TrajectoryError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum ContextItem {
    Prompt(String),
    Reasoning(String),
    Image(ImageRef),
}

/// `c_t = {x_prompt, (r_0, x_0), …, (r_{t-1}, x_{t-1}), r_t}` with target `x_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSample {
    pub t: usize,
    pub context: Vec<ContextItem>,
    pub target: ImageRef,
}

impl TruncatedSample {
    /// The historical image set `C_img` visible in the context.
    pub fn context_images(&self) -> Vec<&ImageRef> {
        context_images(&self.context)
    }
}

pub fn context_images(context: &[ContextItem]) -> Vec<&ImageRef> {
    context
        .iter()
        .filter_map(|item| match item {
            ContextItem::Image(image) => Some(image),
            _ => None,
        })
        .collect()
}

/// Truncate at the `t`-th image-bearing step.
///
/// Pairs are indexed over image-bearing steps only; tool and terminate steps
/// carry no image and are not part of the context.
pub fn truncate_at(traj: &Trajectory, t: usize) -> Result<TruncatedSample, TrajectoryError> {
    let pairs: Vec<_> = traj.image_steps().collect();
    let Some(step) = pairs.get(t) else {
        return Err(TrajectoryError::OutOfRange { t, images: pairs.len() });
    };

    let mut context = Vec::with_capacity(2 * t + 2);
    context.push(ContextItem::Prompt(traj.prompt.clone()));
    for prior in &pairs[..t] {
        context.push(ContextItem::Reasoning(prior.reasoning.clone()));
        context.push(ContextItem::Image(prior.image.clone().expect("image step")));
    }
    context.push(ContextItem::Reasoning(step.reasoning.clone()));

    Ok(TruncatedSample { t, context, target: step.image.clone().expect("image step") })
}

/// One training sample per image-bearing step, ordered by `t`.
pub fn expand_all(traj: &Trajectory) -> Result<Vec<TruncatedSample>, TrajectoryError> {
    ensure_valid(traj)?;
    (0..traj.image_count()).map(|t| truncate_at(traj, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::trajectory;
    use super::*;

    fn reasoning(s: &str) -> ContextItem {
        ContextItem::Reasoning(s.to_string())
    }

    #[test]
    fn truncate_middle_step() {
        let traj = trajectory("a", 3);
        let sample = truncate_at(&traj, 1).unwrap();
        let x0 = traj.steps[0].image.clone().unwrap();
        assert_eq!(
            sample.context,
            vec![
                ContextItem::Prompt(traj.prompt.clone()),
                reasoning("reason 0"),
                ContextItem::Image(x0),
                reasoning("reason 1"),
            ]
        );
        assert_eq!(&sample.target, traj.steps[1].image.as_ref().unwrap());
    }

    #[test]
    fn truncate_base_case() {
        let traj = trajectory("a", 3);
        let sample = truncate_at(&traj, 0).unwrap();
        assert_eq!(sample.context.len(), 2);
        assert!(matches!(sample.context.last(), Some(ContextItem::Reasoning(_))));
        assert_eq!(sample.target.id, "a-x0");
    }

    #[test]
    fn truncate_past_last_image_is_out_of_range() {
        let traj = trajectory("a", 3);
        assert_eq!(truncate_at(&traj, 3), Err(TrajectoryError::OutOfRange { t: 3, images: 3 }));
    }

    #[test]
    fn expand_counts_images() {
        assert_eq!(expand_all(&trajectory("a", 3)).unwrap().len(), 3);
        assert!(expand_all(&trajectory("z", 0)).unwrap().is_empty());
        let traj = trajectory("b", 4);
        let all = expand_all(&traj).unwrap();
        for (t, sample) in all.iter().enumerate() {
            assert_eq!(&truncate_at(&traj, t).unwrap(), sample);
            assert_eq!(sample.context_images().len(), t);
        }
    }

    #[test]
    fn expand_rejects_invalid() {
        let traj = trajectory("n", 9);
        assert!(matches!(expand_all(&traj), Err(TrajectoryError::Invalid { .. })));
    }
}
