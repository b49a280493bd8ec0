//! Judge score aggregation and the pass-complexity curve.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{ProbeError, Tiering, TIER_COUNT};

/// Seeds used to render the images of one prompt.
pub const DEFAULT_SEEDS: [u64; 4] = [42, 123, 456, 789];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub prompt_id: String,
    pub seed: u64,
    pub recall: f64,
    #[serde(deserialize_with = "bool_or_int")]
    pub pass: bool,
}

fn bool_or_int<'de, D: serde::Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    let raw = String::deserialize(d)?;
    match raw.trim() {
        "1" | "true" | "True" => Ok(true),
        "0" | "false" | "False" => Ok(false),
        other => Err(serde::de::Error::custom(format!("pass must be 0/1 or true/false, got {other:?}"))),
    }
}

/// Read `prompt_id,seed,recall,pass` rows (header required).
pub fn read_scores_csv(reader: impl Read) -> Result<Vec<ScoreRow>, ProbeError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .map(|row| row.map_err(|e| ProbeError::Scores(e.to_string())))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassMode {
    /// Fraction of a prompt's images that pass.
    #[default]
    Fraction,
    /// 1 if any image passes.
    AnyImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateOptions {
    pub mode: PassMode,
    /// Required images per prompt; `None` only requires all prompts to agree.
    pub images_per_prompt: Option<usize>,
    pub allow_ragged: bool,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions { mode: PassMode::Fraction, images_per_prompt: Some(DEFAULT_SEEDS.len()), allow_ragged: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptScore {
    pub pass: f64,
    pub recall: f64,
    pub images: usize,
}

/// Collapse per-image judgements into per-prompt pass and recall.
pub fn aggregate(
    rows: &[ScoreRow],
    opts: AggregateOptions,
) -> Result<BTreeMap<String, PromptScore>, ProbeError> {
    let mut by_prompt: BTreeMap<&str, Vec<&ScoreRow>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for row in rows {
        if !(0.0..=1.0).contains(&row.recall) {
            return Err(ProbeError::Scores(format!(
                "{} seed {}: recall {} outside [0, 1]",
                row.prompt_id, row.seed, row.recall
            )));
        }
        if !seen.insert((row.prompt_id.as_str(), row.seed)) {
            return Err(ProbeError::Scores(format!("duplicate row for {} seed {}", row.prompt_id, row.seed)));
        }
        by_prompt.entry(&row.prompt_id).or_default().push(row);
    }

    if !opts.allow_ragged {
        let expected = opts
            .images_per_prompt
            .or_else(|| by_prompt.values().next().map(Vec::len));
        if let Some(expected) = expected {
            if let Some((id, imgs)) = by_prompt.iter().find(|(_, v)| v.len() != expected) {
                return Err(ProbeError::Ragged { prompt: id.to_string(), found: imgs.len(), expected });
            }
        }
    }

    Ok(by_prompt
        .into_iter()
        .map(|(id, imgs)| {
            let k = imgs.len() as f64;
            let passes = imgs.iter().filter(|r| r.pass).count();
            let pass = match opts.mode {
                PassMode::Fraction => passes as f64 / k,
                PassMode::AnyImage => f64::from(u8::from(passes > 0)),
            };
            let recall = imgs.iter().map(|r| r.recall).sum::<f64>() / k;
            (id.to_string(), PromptScore { pass, recall, images: imgs.len() })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierScore {
    pub tier: usize,
    pub median_c_task: f64,
    pub pass_rate: f64,
    pub mean_recall: f64,
    pub prompts: usize,
}

/// Mean of member-prompt scores for each tier. Every member must be scored.
pub fn tier_scores(
    prompts: &BTreeMap<String, PromptScore>,
    tiering: &Tiering,
) -> Result<Vec<TierScore>, ProbeError> {
    tiering
        .tiers
        .iter()
        .map(|tier| {
            let scores = tier
                .members
                .iter()
                .map(|id| prompts.get(id).ok_or_else(|| ProbeError::Scores(format!("no scores for prompt {id:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let n = scores.len() as f64;
            Ok(TierScore {
                tier: tier.index,
                median_c_task: tier.median_c_task,
                pass_rate: scores.iter().map(|s| s.pass).sum::<f64>() / n,
                mean_recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
                prompts: scores.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierPoint {
    /// Median C_task of the tier.
    pub x: f64,
    pub pass: f64,
    pub recall: f64,
}

/// Ten tier points with strictly increasing `x` and rates in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierCurve {
    points: Vec<TierPoint>,
}

impl TierCurve {
    pub fn new(points: Vec<TierPoint>) -> Result<Self, ProbeError> {
        if points.len() != TIER_COUNT {
            return Err(ProbeError::Curve(format!("need {TIER_COUNT} points, got {}", points.len())));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1].x > w[0].x)) {
            return Err(ProbeError::Curve(format!("x not strictly increasing at {} -> {}", w[0].x, w[1].x)));
        }
        if points.iter().any(|p| !(0.0..=1.0).contains(&p.pass) || !(0.0..=1.0).contains(&p.recall)) {
            return Err(ProbeError::Curve("rates must lie in [0, 1]".into()));
        }
        Ok(TierCurve { points })
    }

    pub fn from_tier_scores(scores: &[TierScore]) -> Result<Self, ProbeError> {
        Self::new(
            scores
                .iter()
                .map(|s| TierPoint { x: s.median_c_task, pass: s.pass_rate, recall: s.mean_recall })
                .collect(),
        )
    }

    pub fn points(&self) -> &[TierPoint] {
        &self.points
    }
}

impl<'de> Deserialize<'de> for TierCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            points: Vec<TierPoint>,
        }
        let raw = Raw::deserialize(d)?;
        TierCurve::new(raw.points).map_err(serde::de::Error::custom)
    }
}

/// Unnormalised trapezoid rule over `(x, y)` with strictly increasing `x`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> Result<f64, ProbeError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(ProbeError::Curve("need matching x and y with at least 2 points".into()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ProbeError::Curve("x must be strictly increasing".into()));
    }
    Ok(xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) / 2.0 * (y[0] + y[1]))
        .sum())
}

/// Area under the pass-rate-vs-complexity curve.
pub fn auc_pass(curve: &TierCurve) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve.points.iter().map(|p| (p.x, p.pass)).unzip();
    trapezoid(&xs, &ys).expect("curve invariants hold")
}

pub fn auc_recall(curve: &TierCurve) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve.points.iter().map(|p| (p.x, p.recall)).unzip();
    trapezoid(&xs, &ys).expect("curve invariants hold")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, seed: u64, recall: f64, pass: bool) -> ScoreRow {
        ScoreRow { prompt_id: id.into(), seed, recall, pass }
    }

    fn curve(ys: impl Fn(usize) -> f64) -> TierCurve {
        TierCurve::new((1..=10).map(|k| TierPoint { x: k as f64, pass: ys(k), recall: ys(k) }).collect()).unwrap()
    }

    #[test]
    fn fraction_rule() {
        let rows: Vec<_> = [true, true, false, false]
            .iter()
            .zip(DEFAULT_SEEDS)
            .map(|(&p, s)| row("a", s, 0.5, p))
            .collect();
        let agg = aggregate(&rows, AggregateOptions::default()).unwrap();
        assert_eq!(agg["a"].pass, 0.5);
        let any = aggregate(&rows, AggregateOptions { mode: PassMode::AnyImage, ..Default::default() }).unwrap();
        assert_eq!(any["a"].pass, 1.0);
    }

    #[test]
    fn ragged_rejected_unless_allowed() {
        let rows = vec![row("a", 1, 1.0, true), row("a", 2, 1.0, true), row("b", 1, 1.0, true)];
        let opts = AggregateOptions { images_per_prompt: None, ..Default::default() };
        assert!(matches!(aggregate(&rows, opts), Err(ProbeError::Ragged { .. })));
        assert!(aggregate(&rows, AggregateOptions { allow_ragged: true, ..opts }).is_ok());
        assert!(aggregate(&rows[..2], AggregateOptions::default()).is_err());
    }

    #[test]
    fn duplicate_seed_rejected() {
        let rows = vec![row("a", 1, 1.0, true), row("a", 1, 1.0, true)];
        assert!(aggregate(&rows, AggregateOptions { images_per_prompt: None, ..Default::default() }).is_err());
    }

    #[test]
    fn csv_reader() {
        let text = "prompt_id,seed,recall,pass\np1,42,0.75,1\np1,123,0.5,false\n";
        let rows = read_scores_csv(text.as_bytes()).unwrap();
        assert_eq!(rows, vec![row("p1", 42, 0.75, true), row("p1", 123, 0.5, false)]);
        assert!(read_scores_csv("prompt_id,seed,recall,pass\np,1,0.5,maybe\n".as_bytes()).is_err());
    }

    #[test]
    fn auc_hand_cases() {
        assert_eq!(auc_pass(&curve(|_| 1.0)), 9.0);
        assert!((auc_pass(&curve(|k| k as f64 / 10.0)) - 4.95).abs() < 1e-12);
        assert_eq!(auc_pass(&curve(|_| 0.0)), 0.0);
    }

    #[test]
    fn curve_validation() {
        let mut pts: Vec<_> = (1..=10).map(|k| TierPoint { x: k as f64, pass: 0.5, recall: 0.5 }).collect();
        pts[4].x = 4.0;
        assert!(TierCurve::new(pts.clone()).is_err());
        assert!(TierCurve::new(pts[..9].to_vec()).is_err());
        assert!(trapezoid(&[1.0, 0.5], &[0.0, 0.0]).is_err());
    }
}
