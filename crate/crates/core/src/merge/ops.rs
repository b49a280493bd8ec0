use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{MergeError, Tensor, TensorMap};

/// How to treat names present on one side only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum KeyMode {
    /// Any mismatch is an error.
    #[default]
    Strict,
    /// Mismatched names are skipped and listed in the result.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    MissingInBase,
    MissingInDelta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedKey {
    /// Which operand the name came from, e.g. `"delta[1]"`.
    pub source: String,
    pub name: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Merged {
    pub map: TensorMap,
    pub skipped: Vec<SkippedKey>,
}

fn same_shape(name: &str, a: &Tensor, b: &Tensor) -> Result<(), MergeError> {
    if a.shape() != b.shape() {
        return Err(MergeError::ShapeMismatch {
            name: name.to_string(),
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn key_diff(left: &TensorMap, right: &TensorMap) -> (Vec<String>, Vec<String>) {
    let only_left = left.names().filter(|n| !right.contains(n)).cloned().collect();
    let only_right = right.names().filter(|n| !left.contains(n)).cloned().collect();
    (only_left, only_right)
}

/// Elementwise `ckpt − base` over the shared names.
pub fn delta(ckpt: &TensorMap, base: &TensorMap, mode: KeyMode) -> Result<Merged, MergeError> {
    let (only_ckpt, only_base) = key_diff(ckpt, base);
    if mode == KeyMode::Strict && !(only_ckpt.is_empty() && only_base.is_empty()) {
        return Err(MergeError::KeyMismatch { only_left: only_ckpt, only_right: only_base });
    }

    let shared: Vec<(&String, &Tensor)> = ckpt.iter().filter(|(n, _)| base.contains(n)).collect();
    let tensors = shared
        .par_iter()
        .map(|(name, c)| {
            let b = base.get(name).expect("shared name");
            same_shape(name, c, b)?;
            let data = c.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
            Ok(((*name).clone(), c.map_data(data)))
        })
        .collect::<Result<Vec<_>, MergeError>>()?;

    let mut map = TensorMap::new();
    for (name, t) in tensors {
        map.insert_unchecked(name, t);
    }
    let mut skipped: Vec<SkippedKey> = only_ckpt
        .into_iter()
        .map(|name| SkippedKey { source: "ckpt".into(), name, reason: SkipReason::MissingInBase })
        .collect();
    skipped.extend(only_base.into_iter().map(|name| SkippedKey {
        source: "ckpt".into(),
        name,
        reason: SkipReason::MissingInDelta,
    }));
    Ok(Merged { map, skipped })
}

/// Sum one element across deltas in a canonical value order so that the
/// result does not depend on the order the deltas were passed in.
fn merge_element(base: f32, parts: &mut [f32]) -> f32 {
    parts.sort_unstable_by(|a, b| a.total_cmp(b));
    let increment: f64 = parts.iter().map(|&v| f64::from(v)).sum();
    (f64::from(base) + increment) as f32
}

/// `W_base + Σ deltas`, elementwise, rounded to f32 once.
///
/// In lenient mode a delta name absent from the base is skipped, and a base
/// name absent from a delta contributes zero; both are listed in `skipped`.
pub fn apply_merge(
    base: &TensorMap,
    deltas: &[TensorMap],
    mode: KeyMode,
) -> Result<Merged, MergeError> {
    let mut skipped = Vec::new();
    for (i, d) in deltas.iter().enumerate() {
        let (only_delta, only_base) = key_diff(d, base);
        if mode == KeyMode::Strict && !only_delta.is_empty() {
            return Err(MergeError::KeyMismatch { only_left: only_delta, only_right: vec![] });
        }
        let source = format!("delta[{i}]");
        skipped.extend(only_delta.into_iter().map(|name| SkippedKey {
            source: source.clone(),
            name,
            reason: SkipReason::MissingInBase,
        }));
        if mode == KeyMode::Lenient {
            skipped.extend(only_base.into_iter().map(|name| SkippedKey {
                source: source.clone(),
                name,
                reason: SkipReason::MissingInDelta,
            }));
        }
    }

    let entries: Vec<(&String, &Tensor)> = base.iter().collect();
    let fused = entries
        .par_iter()
        .map(|(name, b)| {
            let parts: Vec<&Tensor> = deltas.iter().filter_map(|d| d.get(name)).collect();
            for p in &parts {
                same_shape(name, b, p)?;
            }
            let mut scratch = Vec::with_capacity(parts.len());
            let data = (0..b.len())
                .map(|i| {
                    scratch.clear();
                    scratch.extend(parts.iter().map(|p| p.data()[i]));
                    merge_element(b.data()[i], &mut scratch)
                })
                .collect();
            Ok(((*name).clone(), b.map_data(data)))
        })
        .collect::<Result<Vec<_>, MergeError>>()?;

    let mut map = TensorMap::new();
    for (name, t) in fused {
        map.insert_unchecked(name, t);
    }
    Ok(Merged { map, skipped })
}

/// `‖other − reference‖_F / ‖reference‖_F` over all tensors.
pub fn relative_frobenius(reference: &TensorMap, other: &TensorMap) -> Result<f64, MergeError> {
    let (only_ref, only_other) = key_diff(reference, other);
    if !(only_ref.is_empty() && only_other.is_empty()) {
        return Err(MergeError::KeyMismatch { only_left: only_ref, only_right: only_other });
    }
    let per_tensor = reference
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(name, r)| {
            let o = other.get(name).expect("same keys");
            same_shape(name, r, o)?;
            let diff: f64 = r
                .data()
                .iter()
                .zip(o.data())
                .map(|(&a, &b)| (f64::from(b) - f64::from(a)).powi(2))
                .sum();
            Ok((diff, r.frobenius_sq()))
        })
        .collect::<Result<Vec<_>, MergeError>>()?;
    let (num, den) = per_tensor.iter().fold((0.0, 0.0), |(n, d), (a, b)| (n + a, d + b));
    if den == 0.0 {
        return Err(MergeError::ZeroReferenceNorm);
    }
    Ok(num.sqrt() / den.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TensorNorms {
    pub delta_frobenius: f64,
    pub base_frobenius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeReport {
    pub per_tensor: BTreeMap<String, TensorNorms>,
    pub global_relative_shift: f64,
    pub missing_in_base: Vec<String>,
    pub missing_in_delta: Vec<String>,
}

impl MergeReport {
    /// Recompute the global shift from the per-tensor entries.
    pub fn recomputed_global(&self) -> f64 {
        let (num, den) = self.per_tensor.values().fold((0.0, 0.0), |(n, d), t| {
            (n + t.delta_frobenius.powi(2), d + t.base_frobenius.powi(2))
        });
        num.sqrt() / den.sqrt()
    }
}

/// Per-tensor and global size of an increment relative to its base. The
/// global value is `NaN` when the shared base tensors have zero norm.
pub fn merge_report(
    base: &TensorMap,
    delta: &TensorMap,
    mode: KeyMode,
) -> Result<MergeReport, MergeError> {
    let (missing_in_base, missing_in_delta) = key_diff(delta, base);
    if mode == KeyMode::Strict && !(missing_in_base.is_empty() && missing_in_delta.is_empty()) {
        return Err(MergeError::KeyMismatch {
            only_left: missing_in_base,
            only_right: missing_in_delta,
        });
    }
    let mut per_tensor = BTreeMap::new();
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (name, d) in delta.iter() {
        let Some(b) = base.get(name) else { continue };
        same_shape(name, b, d)?;
        let (dsq, bsq) = (d.frobenius_sq(), b.frobenius_sq());
        num += dsq;
        den += bsq;
        per_tensor.insert(
            name.clone(),
            TensorNorms { delta_frobenius: dsq.sqrt(), base_frobenius: bsq.sqrt() },
        );
    }
    Ok(MergeReport {
        per_tensor,
        global_relative_shift: num.sqrt() / den.sqrt(),
        missing_in_base,
        missing_in_delta,
    })
}
