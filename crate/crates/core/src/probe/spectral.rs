//! Entropy effective rank of weight spectra.

use nalgebra::DMatrix;
use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;

use super::{tiers::lower_median, ProbeError};
use crate::merge::{Tensor, TensorMap};

/// `exp(H(p))` with `p_i = σ_i² / Σσ_j²`; zero entries contribute nothing.
pub fn effective_rank(singular_values: &[f64]) -> Result<f64, ProbeError> {
    if let Some(s) = singular_values.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(ProbeError::Spectrum(format!("singular value {s} is not a nonnegative real")));
    }
    let energy: f64 = singular_values.iter().map(|s| s * s).sum();
    if energy <= 0.0 {
        return Err(ProbeError::Spectrum("all-zero spectrum".into()));
    }
    let entropy: f64 = singular_values
        .iter()
        .map(|s| s * s / energy)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Ok(entropy.exp())
}

pub fn singular_values(t: &Tensor) -> Result<Vec<f64>, ProbeError> {
    let &[rows, cols] = t.shape() else {
        return Err(ProbeError::Spectrum(format!("expected a 2-D tensor, got shape {:?}", t.shape())));
    };
    let m = DMatrix::from_row_iterator(rows, cols, t.data().iter().map(|&v| f64::from(v)));
    Ok(m.singular_values().iter().copied().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixRank {
    pub name: String,
    pub shape: [usize; 2],
    pub effective_rank: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IEffReport {
    /// Lower median of the per-matrix effective ranks.
    pub i_eff: f64,
    pub matrices: Vec<MatrixRank>,
    /// Names matched by the filter but skipped for not being 2-D.
    pub skipped: Vec<String>,
}

/// Effective rank of every 2-D tensor whose name matches `filter`.
pub fn i_eff(ckpt: &TensorMap, filter: &Regex) -> Result<IEffReport, ProbeError> {
    let selected = ckpt.filtered(filter);
    let (matrices, skipped): (Vec<_>, Vec<_>) = selected.iter().partition(|(_, t)| t.shape().len() == 2);
    if matrices.is_empty() {
        return Err(ProbeError::Spectrum(format!("no 2-D tensors match {:?}", filter.as_str())));
    }
    let matrices = matrices
        .par_iter()
        .map(|(name, t)| {
            let rank = singular_values(t)
                .and_then(|sv| effective_rank(&sv))
                .map_err(|e| ProbeError::Spectrum(format!("{name}: {e}")))?;
            Ok(MatrixRank { name: name.to_string(), shape: [t.shape()[0], t.shape()[1]], effective_rank: rank })
        })
        .collect::<Result<Vec<_>, ProbeError>>()?;
    let mut ranks: Vec<f64> = matrices.iter().map(|m| m.effective_rank).collect();
    ranks.sort_by(f64::total_cmp);
    Ok(IEffReport {
        i_eff: lower_median(&ranks).expect("at least one matrix"),
        matrices,
        skipped: skipped.into_iter().map(|(n, _)| n.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        assert!((effective_rank(&[1.0; 5]).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(effective_rank(&[2.0, 0.0, 0.0]).unwrap(), 1.0);
        let r = effective_rank(&[3.0, 1.0]).unwrap();
        assert!((r - 1.3842).abs() < 1e-4, "{r}");
        assert!(effective_rank(&[0.0, 0.0]).is_err());
        assert!(effective_rank(&[-1.0]).is_err());
    }

    #[test]
    fn identity_matrix_spectrum() {
        let mut data = vec![0.0f32; 25];
        for i in 0..5 {
            data[i * 6] = 1.0;
        }
        let mut map = TensorMap::new();
        map.insert("layer.weight", Tensor::new(vec![5, 5], data).unwrap()).unwrap();
        map.insert("layer.bias", Tensor::new(vec![5], vec![1.0; 5]).unwrap()).unwrap();
        let report = i_eff(&map, &Regex::new("layer").unwrap()).unwrap();
        assert!((report.i_eff - 5.0).abs() < 1e-9);
        assert_eq!(report.skipped, vec!["layer.bias".to_string()]);
        assert!(i_eff(&map, &Regex::new("nothing").unwrap()).is_err());
    }
}
