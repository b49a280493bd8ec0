//! Binomial and mean uncertainty, NFE accounting and latency ratios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::trajectory::Trajectory;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("need at least 2 values for a sample standard deviation, got {0}")]
    TooFewValues(usize),
    #[error("proportion {0} outside [0, 1]")]
    ProportionOutOfRange(f64),
    #[error("confidence {0} must lie strictly between 0 and 1")]
    BadConfidence(f64),
    #[error("fast time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("config needs steps >= 1 and iterations >= 1")]
    BadNfeConfig,
    #[error("trajectory {0:?} has no image-bearing steps")]
    NoIterations(String),
}

/// Two-sided critical values pinned for the usual confidence levels.
const Z_TABLE: [(f64, f64); 3] = [(0.90, 1.644854), (0.95, 1.959964), (0.99, 2.575829)];

/// Two-sided normal critical value for `confidence`.
pub fn z_value(confidence: f64) -> Result<f64, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::BadConfidence(confidence));
    }
    if let Some((_, z)) = Z_TABLE.iter().find(|(c, _)| (c - confidence).abs() < 1e-12) {
        return Ok(*z);
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + confidence / 2.0))
}

fn check_proportion(p_hat: f64, n: u64) -> Result<(), StatsError> {
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(StatsError::ProportionOutOfRange(p_hat));
    }
    Ok(())
}

/// Wald standard error `sqrt(p(1-p)/n)`.
pub fn se_binomial(p_hat: f64, n: u64) -> Result<f64, StatsError> {
    check_proportion(p_hat, n)?;
    Ok((p_hat * (1.0 - p_hat) / n as f64).sqrt())
}

/// Wilson score interval, clipped to `[0, 1]`.
pub fn wilson_interval(p_hat: f64, n: u64, confidence: f64) -> Result<(f64, f64), StatsError> {
    check_proportion(p_hat, n)?;
    let z = z_value(confidence)?;
    let n = n as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// Centre of the Wilson interval.
pub fn wilson_center(p_hat: f64, n: u64, confidence: f64) -> Result<f64, StatsError> {
    check_proportion(p_hat, n)?;
    let z2 = z_value(confidence)?.powi(2);
    let n = n as f64;
    Ok((p_hat + z2 / (2.0 * n)) / (1.0 + z2 / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialSummary {
    pub p_hat: f64,
    pub n: u64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

impl BinomialSummary {
    pub fn new(p_hat: f64, n: u64, confidence: f64) -> Result<Self, StatsError> {
        let se = se_binomial(p_hat, n)?;
        let (ci_low, ci_high) = wilson_interval(p_hat, n, confidence)?;
        Ok(BinomialSummary { p_hat, n, se, ci_low, ci_high, confidence })
    }
}

/// Standard error of the mean, `s / sqrt(N)` with the `N - 1` sample deviation.
pub fn se_mean(values: &[f64]) -> Result<f64, StatsError> {
    Ok(sample_std(values)? / (values.len() as f64).sqrt())
}

pub fn sample_std(values: &[f64]) -> Result<f64, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::TooFewValues(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (n - 1) as f64).sqrt())
}

/// Normal-approximation interval `mean ± z·se`.
pub fn normal_ci(mean: f64, se: f64, confidence: f64) -> Result<(f64, f64), StatsError> {
    let z = z_value(confidence)?;
    Ok((mean - z * se, mean + z * se))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NfeConfig {
    pub sampling_steps: u64,
    pub cfg_enabled: bool,
    pub iterations: u64,
}

impl NfeConfig {
    /// 28 steps with classifier-free guidance.
    pub fn base(iterations: u64) -> Self {
        NfeConfig { sampling_steps: 28, cfg_enabled: true, iterations }
    }

    /// 4-step distilled sampling, guidance off.
    pub fn distilled(iterations: u64) -> Self {
        NfeConfig { sampling_steps: 4, cfg_enabled: false, iterations }
    }
}

/// Denoiser evaluations: `iterations × steps × (2 with CFG, else 1)`.
pub fn nfe(config: NfeConfig) -> Result<u64, StatsError> {
    if config.sampling_steps == 0 || config.iterations == 0 {
        return Err(StatsError::BadNfeConfig);
    }
    let per_image = config.sampling_steps * if config.cfg_enabled { 2 } else { 1 };
    Ok(config.iterations * per_image)
}

pub fn speedup(base_seconds: f64, fast_seconds: f64) -> Result<f64, StatsError> {
    if !(fast_seconds > 0.0) {
        return Err(StatsError::NonPositiveTime(fast_seconds));
    }
    Ok(base_seconds / fast_seconds)
}

/// Trajectory count per number of image-bearing iterations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationHistogram {
    pub counts: BTreeMap<usize, u64>,
}

impl IterationHistogram {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn record(&mut self, iterations: usize) {
        *self.counts.entry(iterations).or_default() += 1;
    }
}

pub fn histogram<'a>(
    trajs: impl IntoIterator<Item = &'a Trajectory>,
) -> Result<IterationHistogram, StatsError> {
    let mut hist = IterationHistogram::default();
    for traj in trajs {
        match traj.image_count() {
            0 => return Err(StatsError::NoIterations(traj.id.clone())),
            k => hist.record(k),
        }
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::fixtures::trajectory;

    #[test]
    fn se_binomial_cases() {
        assert!((se_binomial(0.5, 100).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(se_binomial(0.0, 7).unwrap(), 0.0);
        let se = se_binomial(0.8645, 553).unwrap();
        assert!((se - 0.014554).abs() < 1e-6);
        assert!((se - 0.0146).abs() < 3e-4);
        assert_eq!(se_binomial(0.5, 0), Err(StatsError::EmptySample));
    }

    #[test]
    fn wilson_at_zero_has_closed_form() {
        let z = 1.959964f64;
        let (lo, hi) = wilson_interval(0.0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - z * z / (10.0 + z * z)).abs() < 1e-12);
        assert!((hi - 0.2775).abs() < 1e-4);
    }

    #[test]
    fn wilson_narrows_at_large_n() {
        let (lo, hi) = wilson_interval(0.5, 1_000_000, 0.95).unwrap();
        assert!(hi - lo < 0.002);
        let c = wilson_center(0.5, 1_000_000, 0.95).unwrap();
        assert!(((c - lo) - (hi - c)).abs() < 1e-12);
    }

    #[test]
    fn se_mean_hand_case() {
        let s = sample_std(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((s - 1.5811388).abs() < 1e-6);
        assert!((se_mean(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert_eq!(se_mean(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(se_mean(&[1.0]), Err(StatsError::TooFewValues(1)));
        assert_eq!(normal_ci(3.0, 0.0, 0.95).unwrap(), (3.0, 3.0));
    }

    #[test]
    fn z_lookup() {
        assert_eq!(z_value(0.95).unwrap(), 1.959964);
        assert!((z_value(0.80).unwrap() - 1.281552).abs() < 1e-6);
        assert!(z_value(1.0).is_err());
    }

    #[test]
    fn nfe_cases() {
        assert_eq!(nfe(NfeConfig::base(1)).unwrap(), 56);
        assert_eq!(nfe(NfeConfig::distilled(1)).unwrap(), 4);
        assert_eq!(nfe(NfeConfig::distilled(3)).unwrap(), 12);
        assert!(nfe(NfeConfig::distilled(0)).is_err());
    }

    #[test]
    fn speedup_cases() {
        assert!((speedup(287.0, 25.5).unwrap() - 11.2549).abs() < 1e-3);
        assert!((speedup(192.4, 12.6).unwrap() - 15.2698).abs() < 1e-3);
        assert_eq!(speedup(3.0, 3.0).unwrap(), 1.0);
        assert!(speedup(3.0, 0.0).is_err());
    }

    #[test]
    fn histogram_totals() {
        let trajs = [trajectory("a", 2), trajectory("b", 2), trajectory("c", 5)];
        let hist = histogram(&trajs).unwrap();
        assert_eq!(hist.total(), 3);
        assert_eq!(hist.counts[&2], 2);
        assert_eq!(hist.counts[&5], 1);
        assert!(histogram(&[trajectory("z", 0)]).is_err());
    }
}
