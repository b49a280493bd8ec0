//! RL-ready training items built from trajectories: proxy prompts, the
//! composite proxy reward and the task-mix sampler.

mod batch;
mod proxy;
mod reward;

pub use batch::{build_rl_batch, sample_task, RlItem, StepBucket, TaskKind, TaskMixWeights, MAX_BUCKET_RETRIES};
pub use proxy::{extract_proxy, ProxyExtractor, ProxyPrompts, SimExtractor};
pub use reward::{proxy_reward, RewardInputs, RewardModel, RewardWeights, SimRewardModel};

use serde::{Deserialize, Serialize};

use crate::trajectory::TrajectoryError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AlignmentError {
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("proxy i_ref index {index} out of range for {images} context images")]
    ProxyIndex { index: usize, images: usize },
    #[error("proxy prompts do not match step {t}: {message}")]
    ProxyShape { t: usize, message: String },
    #[error("extractor failed: {0}")]
    Extractor(String),
    #[error("reward: {0}")]
    Reward(String),
    #[error("task weights: {0}")]
    Weights(String),
    #[error("item {item}: no trajectory matched a drawn task after {attempts} draws")]
    NoMatchingBucket { item: usize, attempts: usize },
}

/// Recorded optimiser settings. Nothing here is executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlConfig {
    pub learning_rate: f64,
    pub kl_beta: f64,
    pub lora_rank: u32,
    pub lora_alpha: f64,
    pub group_size: u32,
    pub cfg_scale: f64,
    pub rollout_steps: u32,
    pub resolution: u32,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            learning_rate: 1e-4,
            kl_beta: 1e-5,
            lora_rank: 128,
            lora_alpha: 256.0,
            group_size: 16,
            cfg_scale: 4.0,
            rollout_steps: 8,
            resolution: 512,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), AlignmentError> {
        if self.lora_rank == 0 {
            return Err(AlignmentError::Weights("lora_rank must be at least 1".into()));
        }
        if !(self.lora_alpha > 0.0) {
            return Err(AlignmentError::Weights("lora_alpha must be positive".into()));
        }
        Ok(())
    }
}
