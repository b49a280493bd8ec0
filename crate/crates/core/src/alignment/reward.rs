use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AlignmentError;
use crate::trajectory::ImageRef;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardInputs {
    pub t: usize,
    pub r_t2i: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_i2i: Option<f64>,
}

/// Mixing weights for steps with `t > 0`. Must be nonnegative and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub t2i: f64,
    pub i2i: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { t2i: 0.5, i2i: 0.5 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), AlignmentError> {
        let ok = [self.t2i, self.i2i].iter().all(|w| w.is_finite() && *w >= 0.0)
            && (self.t2i + self.i2i - 1.0).abs() <= 1e-12;
        if ok {
            Ok(())
        } else {
            Err(AlignmentError::Reward(format!("weights {} / {} must be nonnegative and sum to 1", self.t2i, self.i2i)))
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), AlignmentError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(AlignmentError::Reward(format!("{name} = {v} outside [0, 1]")))
    }
}

/// `R_T2I` for the first step, a weighted mix of `R_T2I` and `R_I2I` after.
pub fn proxy_reward(inputs: RewardInputs, weights: RewardWeights) -> Result<f64, AlignmentError> {
    weights.validate()?;
    check_unit("r_t2i", inputs.r_t2i)?;
    match (inputs.t, inputs.r_i2i) {
        (0, None) => Ok(inputs.r_t2i),
        (0, Some(_)) => Err(AlignmentError::Reward("r_i2i given for t = 0".into())),
        (_, Some(r_i2i)) => {
            check_unit("r_i2i", r_i2i)?;
            Ok((weights.t2i * inputs.r_t2i + weights.i2i * r_i2i).clamp(0.0, 1.0))
        }
        (t, None) => Err(AlignmentError::Reward(format!("r_i2i missing for t = {t}"))),
    }
}

pub trait RewardModel: Send + Sync {
    fn score_t2i(&self, p_t2i: &str, image: &ImageRef) -> Result<f64, AlignmentError>;
    fn score_i2i(&self, p_i2i: &str, refs: &[&ImageRef], image: &ImageRef) -> Result<f64, AlignmentError>;
}

/// Scores the share of prompt tokens found in the requirements an image is
/// known to satisfy.
#[derive(Debug, Clone, Default)]
pub struct SimRewardModel {
    satisfied: BTreeMap<String, BTreeSet<String>>,
}

fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl SimRewardModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register the requirements satisfied by image `id`.
    pub fn record<'a>(&mut self, id: impl Into<String>, requirements: impl IntoIterator<Item = &'a str>) {
        let entry = self.satisfied.entry(id.into()).or_default();
        for r in requirements {
            entry.extend(tokens(r));
        }
    }

    fn overlap(&self, prompt: &str, image: &ImageRef) -> Result<f64, AlignmentError> {
        let known = self
            .satisfied
            .get(&image.id)
            .ok_or_else(|| AlignmentError::Reward(format!("no ground truth for image {:?}", image.id)))?;
        let wanted = tokens(prompt);
        if wanted.is_empty() {
            return Ok(0.0);
        }
        Ok(wanted.intersection(known).count() as f64 / wanted.len() as f64)
    }
}

impl RewardModel for SimRewardModel {
    fn score_t2i(&self, p_t2i: &str, image: &ImageRef) -> Result<f64, AlignmentError> {
        self.overlap(p_t2i, image)
    }

    fn score_i2i(&self, p_i2i: &str, refs: &[&ImageRef], image: &ImageRef) -> Result<f64, AlignmentError> {
        if refs.is_empty() {
            return Err(AlignmentError::Reward("edit reward needs at least one reference image".into()));
        }
        self.overlap(p_i2i, image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::ImageSource;

    fn r(t: usize, a: f64, b: Option<f64>) -> Result<f64, AlignmentError> {
        proxy_reward(RewardInputs { t, r_t2i: a, r_i2i: b }, RewardWeights::default())
    }

    #[test]
    fn closed_form() {
        assert_eq!(r(0, 0.8, None).unwrap(), 0.8);
        assert!((r(3, 0.6, Some(1.0)).unwrap() - 0.8).abs() < 1e-15);
        assert!(r(1, 0.6, None).is_err());
        assert!(r(0, 0.6, Some(0.1)).is_err());
        assert!(r(1, 1.2, Some(0.1)).is_err());
    }

    #[test]
    fn weights_validated() {
        let inputs = RewardInputs { t: 1, r_t2i: 0.2, r_i2i: Some(0.4) };
        assert!(proxy_reward(inputs, RewardWeights { t2i: 0.7, i2i: 0.7 }).is_err());
        let v = proxy_reward(inputs, RewardWeights { t2i: 1.0, i2i: 0.0 }).unwrap();
        assert_eq!(v, 0.2);
    }

    #[test]
    fn sim_overlap() {
        let mut model = SimRewardModel::new();
        model.record("img", ["a red cube", "blue sky"]);
        let img = ImageRef::simulated("img", ImageSource::Generated);
        assert_eq!(model.score_t2i("red cube", &img).unwrap(), 1.0);
        assert_eq!(model.score_t2i("red ball", &img).unwrap(), 0.5);
        assert!(model.score_i2i("red", &[], &img).is_err());
        let other = ImageRef::simulated("other", ImageSource::Generated);
        assert!(model.score_t2i("red", &other).is_err());
    }
}
