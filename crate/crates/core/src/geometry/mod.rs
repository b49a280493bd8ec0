//! Toy experiments for weight-space merging: additive superposition of
//! increments, normal/tangent decoupling on a circle, and the truncation
//! gap between a distilled jump and a windowed alignment field.

mod decoupling;
mod manifold;
mod ode;
mod superposition;
mod tinynet;

pub use decoupling::{
    circle_points, constructed_toy, increment_cosine, trained_toy, CosineStats, ToyTrainingConfig, TrainedToyReport,
};
pub use manifold::Circle;
pub use ode::{epsilon_sweep, truncation_gap, EpsilonSweep, OdeSetup, TruncationResult};
pub use superposition::{jvp, log_log_slope, superposition_error, superposition_sweep, ScalingSweep, JVP_STEP};
pub use tinynet::{Activation, TinyNet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("projection undefined at the circle's center")]
    Degenerate,
    #[error("point at distance {distance} from the circle is outside its tubular neighborhood (radius {radius})")]
    OutsideNeighborhood { distance: f64, radius: f64 },
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid config: {0}")]
    Config(String),
}
