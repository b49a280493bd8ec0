//! Delta-space weight merging.
//!
//! Checkpoints are [`TensorMap`]s. A fine-tuned checkpoint is reduced to its
//! increment over a shared base with [`delta`]; increments from independent
//! tasks are summed back onto the base with [`apply_merge`]:
//!
//! ```text
//! W_fused = W_base + ΔW_distill + ΔW_align
//! ```
//!
//! Storage is f32; every reduction (norms, sums) is accumulated in f64.

mod container;
mod lora;
mod ops;
mod tensor;

pub use container::{decode, encode, load_checkpoint, save_checkpoint, MAGIC};
pub use lora::{expand_lora, LoraAdapter};
pub use ops::{
    apply_merge, delta, merge_report, relative_frobenius, KeyMode, MergeReport, Merged,
    SkipReason, SkippedKey, TensorNorms,
};
pub use tensor::{Tensor, TensorMap};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MergeError {
    #[error("container format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),
    #[error("tensor {name:?}: unsupported dtype {dtype:?} (container v1 stores f32 only)")]
    UnsupportedDtype { name: String, dtype: String },
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("key sets differ: only in left {only_left:?}, only in right {only_right:?}")]
    KeyMismatch { only_left: Vec<String>, only_right: Vec<String> },
    #[error("tensor {name:?}: shape {left:?} vs {right:?}")]
    ShapeMismatch { name: String, left: Vec<usize>, right: Vec<usize> },
    #[error("reference checkpoint has zero Frobenius norm")]
    ZeroReferenceNorm,
    #[error("lora: {0}")]
    Lora(String),
}
