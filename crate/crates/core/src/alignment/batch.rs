use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_proxy, AlignmentError, ProxyExtractor, ProxyPrompts};
use crate::rng::item_stream;
use crate::trajectory::{truncate_at, validate_trajectory, Trajectory, TrajectoryError, TruncatedSample, ValidationOptions};

/// Task draws per batch item before giving up on unmatched buckets.
pub const MAX_BUCKET_RETRIES: usize = 16;

/// Edit-step buckets: `t = 1, 2, 3` and `t ≥ 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepBucket {
    One,
    Two,
    Three,
    FourPlus,
}

impl StepBucket {
    pub const ALL: [StepBucket; 4] = [StepBucket::One, StepBucket::Two, StepBucket::Three, StepBucket::FourPlus];

    pub fn of(t: usize) -> Option<StepBucket> {
        match t {
            0 => None,
            1 => Some(StepBucket::One),
            2 => Some(StepBucket::Two),
            3 => Some(StepBucket::Three),
            _ => Some(StepBucket::FourPlus),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskKind {
    T2i,
    I2i { bucket: StepBucket },
}

/// Relative frequencies of T2I vs I2I items and of I2I step buckets.
/// Weights are nonnegative; each group needs a positive sum where it is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskMixWeights {
    pub t2i_weight: f64,
    pub i2i_weight: f64,
    pub i2i_step_bucket_weights: [f64; 4],
}

impl Default for TaskMixWeights {
    fn default() -> Self {
        TaskMixWeights { t2i_weight: 1.0, i2i_weight: 1.0, i2i_step_bucket_weights: [1.0; 4] }
    }
}

impl TaskMixWeights {
    pub fn validate(&self) -> Result<(), AlignmentError> {
        let all = [self.t2i_weight, self.i2i_weight].into_iter().chain(self.i2i_step_bucket_weights);
        if all.into_iter().any(|w| !(w.is_finite() && w >= 0.0)) {
            return Err(AlignmentError::Weights("weights must be finite and nonnegative".into()));
        }
        if self.t2i_weight + self.i2i_weight <= 0.0 {
            return Err(AlignmentError::Weights("T2I and I2I weights are both zero".into()));
        }
        if self.i2i_weight > 0.0 && self.i2i_step_bucket_weights.iter().sum::<f64>() <= 0.0 {
            return Err(AlignmentError::Weights("I2I is drawable but every step bucket has weight zero".into()));
        }
        Ok(())
    }
}

struct Sampler {
    kind: WeightedIndex<f64>,
    bucket: Option<WeightedIndex<f64>>,
}

impl Sampler {
    fn new(w: &TaskMixWeights) -> Result<Self, AlignmentError> {
        w.validate()?;
        let err = |e: rand::distr::weighted::Error| AlignmentError::Weights(e.to_string());
        let kind = WeightedIndex::new([w.t2i_weight, w.i2i_weight]).map_err(err)?;
        let bucket = if w.i2i_weight > 0.0 {
            Some(WeightedIndex::new(w.i2i_step_bucket_weights).map_err(err)?)
        } else {
            None
        };
        Ok(Sampler { kind, bucket })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> TaskKind {
        if self.kind.sample(rng) == 0 {
            return TaskKind::T2i;
        }
        let b = self.bucket.as_ref().expect("i2i weight positive").sample(rng);
        TaskKind::I2i { bucket: StepBucket::ALL[b] }
    }
}

/// Draw a task kind in proportion to the mix weights.
pub fn sample_task<R: Rng + ?Sized>(rng: &mut R, weights: &TaskMixWeights) -> Result<TaskKind, AlignmentError> {
    Ok(Sampler::new(weights)?.draw(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlItem {
    pub trajectory_id: String,
    #[serde(flatten)]
    pub task: TaskKind,
    pub sample: TruncatedSample,
    pub proxy: ProxyPrompts,
}

/// Build `n` training items. Item `i` uses its own random stream, so the
/// batch is identical for a given seed regardless of thread count.
pub fn build_rl_batch(
    trajectories: &[Trajectory],
    n: usize,
    master_seed: u64,
    weights: &TaskMixWeights,
    extractor: &dyn ProxyExtractor,
) -> Result<Vec<RlItem>, AlignmentError> {
    let sampler = Sampler::new(weights)?;
    for traj in trajectories {
        let report = validate_trajectory(traj, ValidationOptions::default());
        if !report.is_valid() {
            return Err(TrajectoryError::Invalid { id: traj.id.clone(), violations: report.to_string() }.into());
        }
    }

    // (trajectory, t) candidates for each task kind.
    let mut t2i = Vec::new();
    let mut buckets: [Vec<(usize, usize)>; 4] = Default::default();
    for (i, traj) in trajectories.iter().enumerate() {
        for t in 0..traj.image_count() {
            match StepBucket::of(t) {
                None => t2i.push((i, t)),
                Some(b) => buckets[b as usize].push((i, t)),
            }
        }
    }

    (0..n)
        .into_par_iter()
        .map(|item| {
            let mut rng = item_stream(master_seed, item as u64);
            for _ in 0..MAX_BUCKET_RETRIES {
                let task = sampler.draw(&mut rng);
                let pool = match task {
                    TaskKind::T2i => &t2i,
                    TaskKind::I2i { bucket } => &buckets[bucket as usize],
                };
                if pool.is_empty() {
                    continue;
                }
                let (ti, t) = pool[rng.random_range(0..pool.len())];
                let traj = &trajectories[ti];
                let sample = truncate_at(traj, t)?;
                let proxy = extract_proxy(&sample.context, extractor)?;
                return Ok(RlItem { trajectory_id: traj.id.clone(), task, sample, proxy });
            }
            Err(AlignmentError::NoMatchingBucket { item, attempts: MAX_BUCKET_RETRIES })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::SimExtractor;
    use crate::rng::seeded;
    use crate::trajectory::fixtures;

    #[test]
    fn zero_i2i_weight_is_always_t2i() {
        let w = TaskMixWeights { t2i_weight: 1.0, i2i_weight: 0.0, ..Default::default() };
        let mut rng = seeded(1);
        assert!((0..1000).all(|_| sample_task(&mut rng, &w).unwrap() == TaskKind::T2i));
    }

    #[test]
    fn invalid_weights() {
        let mut rng = seeded(1);
        let zero = TaskMixWeights { t2i_weight: 0.0, i2i_weight: 0.0, ..Default::default() };
        assert!(sample_task(&mut rng, &zero).is_err());
        let neg = TaskMixWeights { t2i_weight: -1.0, ..Default::default() };
        assert!(sample_task(&mut rng, &neg).is_err());
        let no_bucket = TaskMixWeights { i2i_step_bucket_weights: [0.0; 4], ..Default::default() };
        assert!(sample_task(&mut rng, &no_bucket).is_err());
    }

    #[test]
    fn batch_items_are_consistent() {
        let trajs: Vec<_> = (0..20).map(|i| fixtures::trajectory(&format!("t{i}"), 1 + i % 6)).collect();
        let batch = build_rl_batch(&trajs, 64, 3, &TaskMixWeights::default(), &SimExtractor).unwrap();
        assert_eq!(batch.len(), 64);
        for item in &batch {
            match item.task {
                TaskKind::T2i => {
                    assert_eq!(item.sample.t, 0);
                    assert!(item.proxy.p_i2i.is_none());
                }
                TaskKind::I2i { bucket } => assert_eq!(StepBucket::of(item.sample.t), Some(bucket)),
            }
        }
        assert_eq!(batch, build_rl_batch(&trajs, 64, 3, &TaskMixWeights::default(), &SimExtractor).unwrap());
    }

    #[test]
    fn unmatched_bucket_hits_retry_bound() {
        let trajs: Vec<_> = (0..5).map(|i| fixtures::trajectory(&format!("t{i}"), 1)).collect();
        let w = TaskMixWeights { t2i_weight: 0.0, i2i_weight: 1.0, i2i_step_bucket_weights: [0.0, 0.0, 0.0, 1.0] };
        assert_eq!(
            build_rl_batch(&trajs, 2, 0, &w, &SimExtractor),
            Err(AlignmentError::NoMatchingBucket { item: 0, attempts: MAX_BUCKET_RETRIES })
        );
    }
}
