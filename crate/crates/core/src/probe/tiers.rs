use serde::{Deserialize, Serialize};

use super::ProbeError;

pub const TIER_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRecord {
    pub id: String,
    pub c_task: f64,
    pub words: u32,
}

/// Inclusive word-count interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordInterval {
    pub lo: u32,
    pub hi: u32,
}

impl Default for WordInterval {
    fn default() -> Self {
        WordInterval { lo: 0, hi: u32::MAX }
    }
}

impl WordInterval {
    pub fn contains(&self, words: u32) -> bool {
        (self.lo..=self.hi).contains(&words)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    /// 1-based tier number.
    pub index: usize,
    pub members: Vec<String>,
    pub word_interval: WordInterval,
    pub median_c_task: f64,
    /// Members whose word count falls outside `word_interval`.
    pub trim_candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tiering {
    pub tiers: Vec<Tier>,
}

impl Tiering {
    pub fn medians(&self) -> Vec<f64> {
        self.tiers.iter().map(|t| t.median_c_task).collect()
    }
}

/// Lower-middle element of an already sorted slice.
pub fn lower_median(sorted: &[f64]) -> Option<f64> {
    (!sorted.is_empty()).then(|| sorted[(sorted.len() - 1) / 2])
}

/// Split records into ten tiers at C_task deciles.
///
/// Records are ordered by `(c_task, id)`; tier `k` takes positions
/// `[k·n/10, (k+1)·n/10)`. Medians use the lower-middle rule.
pub fn stratify(
    records: &[ComplexityRecord],
    intervals: Option<&[WordInterval; TIER_COUNT]>,
) -> Result<Tiering, ProbeError> {
    let n = records.len();
    if n < TIER_COUNT {
        return Err(ProbeError::TooFewRecords(n));
    }
    if let Some(r) = records.iter().find(|r| !r.c_task.is_finite()) {
        return Err(ProbeError::InvalidGraph(format!("record {:?} has non-finite C_task", r.id)));
    }
    let mut sorted: Vec<&ComplexityRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.c_task.total_cmp(&b.c_task).then_with(|| a.id.cmp(&b.id)));

    let tiers = (0..TIER_COUNT)
        .map(|k| {
            let members = &sorted[k * n / TIER_COUNT..(k + 1) * n / TIER_COUNT];
            let word_interval = intervals.map(|iv| iv[k]).unwrap_or_default();
            let values: Vec<f64> = members.iter().map(|r| r.c_task).collect();
            Tier {
                index: k + 1,
                members: members.iter().map(|r| r.id.clone()).collect(),
                word_interval,
                median_c_task: lower_median(&values).expect("tiers are non-empty when n >= 10"),
                trim_candidates: members
                    .iter()
                    .filter(|r| !word_interval.contains(r.words))
                    .map(|r| r.id.clone())
                    .collect(),
            }
        })
        .collect();
    Ok(Tiering { tiers })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(values: impl IntoIterator<Item = f64>) -> Vec<ComplexityRecord> {
        values
            .into_iter()
            .enumerate()
            .map(|(i, c)| ComplexityRecord { id: format!("p{i:03}"), c_task: c, words: 10 })
            .collect()
    }

    #[test]
    fn hundred_records_decile_medians() {
        let tiering = stratify(&records((1..=100).map(f64::from)), None).unwrap();
        assert!(tiering.tiers.iter().all(|t| t.members.len() == 10));
        let expected: Vec<f64> = (0..10).map(|k| f64::from(10 * k + 5)).collect();
        assert_eq!(tiering.medians(), expected);
    }

    #[test]
    fn too_few() {
        assert_eq!(
            stratify(&records((1..=9).map(f64::from)), None),
            Err(ProbeError::TooFewRecords(9))
        );
    }

    #[test]
    fn ties_break_by_id() {
        let mut recs = records(std::iter::repeat_n(3.0, 20));
        recs.reverse();
        let tiering = stratify(&recs, None).unwrap();
        assert_eq!(tiering.tiers[0].members, vec!["p000", "p001"]);
        assert_eq!(tiering.tiers[9].members, vec!["p018", "p019"]);
    }

    #[test]
    fn uneven_sizes_and_trim_flags() {
        let mut recs = records((0..23).map(f64::from));
        recs[0].words = 40;
        let mut intervals = [WordInterval::default(); TIER_COUNT];
        intervals[0] = WordInterval { lo: 5, hi: 20 };
        let tiering = stratify(&recs, Some(&intervals)).unwrap();
        let sizes: Vec<usize> = tiering.tiers.iter().map(|t| t.members.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert_eq!(tiering.tiers[0].trim_candidates, vec!["p000"]);
        assert!(tiering.medians().windows(2).all(|w| w[0] <= w[1]));
    }
}
