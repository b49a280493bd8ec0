use std::collections::BTreeSet;

use super::{Trajectory, TrajectoryError};

/// Parse one trajectory per line. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_trajectory_jsonl(bytes: &[u8]) -> Result<Vec<Trajectory>, TrajectoryError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TrajectoryError::MalformedLine {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count(),
        message: "invalid UTF-8".into(),
    })?;

    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let traj: Trajectory = serde_json::from_str(line).map_err(|e| {
            TrajectoryError::MalformedLine { line: i + 1, message: e.to_string() }
        })?;
        if !ids.insert(traj.id.clone()) {
            return Err(TrajectoryError::DuplicateId(traj.id));
        }
        out.push(traj);
    }
    Ok(out)
}

/// One compact JSON object per line, fields in declaration order, `\n`
/// terminated.
pub fn serialize_jsonl(trajectories: &[Trajectory]) -> Vec<u8> {
    let mut out = Vec::new();
    for traj in trajectories {
        serde_json::to_writer(&mut out, traj).expect("trajectory serialization is infallible");
        out.push(b'\n');
    }
    out
}
