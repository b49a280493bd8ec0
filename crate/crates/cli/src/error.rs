use std::fmt;

use clvr_core::{
    AlignmentError, ControllerError, GeometryError, MergeError, ProbeError, StatsError, TrajectoryError,
};

/// A failed command: `kind` is the machine-readable tag in `error[kind]: ...`.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", message)
    }

    pub fn exit_code(&self) -> u8 {
        if self.kind == "usage" {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Keep the message on one line whatever the source error looks like.
        let flat = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{}]: {}", self.kind, flat)
    }
}

macro_rules! domain {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::new($kind, e.to_string())
            }
        })*
    };
}

domain! {
    AlignmentError => "alignment",
    ControllerError => "controller",
    GeometryError => "geometry",
    MergeError => "merge",
    ProbeError => "probe",
    StatsError => "stats",
    TrajectoryError => "trajectory",
    serde_json::Error => "format",
    csv::Error => "format",
}
