//! Closed-loop visual reasoning toolkit: trajectory handling, the simulated
//! data engine, RL batch preparation, delta-space weight merging, geometry
//! toys, the semantic complexity probe and reporting statistics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod controller;
pub mod geometry;
pub mod merge;
pub mod probe;
pub mod rng;
pub mod stats;
pub mod trajectory;

pub use alignment::{AlignmentError, ProxyPrompts, RlConfig, TaskKind, TaskMixWeights};
pub use controller::{ControllerError, ControllerState, PromptSpec, SimEnvConfig, SynthesisStats};
pub use geometry::{Circle, GeometryError, OdeSetup, TinyNet};
pub use merge::{MergeError, Tensor, TensorMap};
pub use probe::{PowerLawFit, ProbeError, SemanticGraph, TierCurve, Tiering};
pub use stats::StatsError;
pub use trajectory::{
    Action, ContentHash, ImageRef, ImageSource, ReasoningStep, Trajectory, TrajectoryError, TruncatedSample,
    MAX_ITERATIONS,
};
