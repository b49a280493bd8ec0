//! Semantic complexity scaling probe: prompt graphs, complexity scores,
//! tiering, trimming, score aggregation, spectral capacity and the
//! capacity-performance fit.

mod dsl;
mod fit;
mod graph;
mod scores;
mod spectral;
mod tiers;
mod trim;

pub use dsl::parse_dsl;
pub use fit::{average_ranks, fit_power_law, spearman, PowerLawFit};
pub use graph::{
    c_task, node_edge_counts, r_extra, ComplexityWeights, Constraint, ConstraintKind, EntityGroup, LogBase,
    NodeEdgeCounts, Relation, SemanticGraph,
};
pub use scores::{
    aggregate, auc_pass, auc_recall, read_scores_csv, tier_scores, trapezoid, AggregateOptions, PassMode,
    PromptScore, ScoreRow, TierCurve, TierPoint, TierScore, DEFAULT_SEEDS,
};
pub use spectral::{effective_rank, i_eff, singular_values, IEffReport, MatrixRank};
pub use tiers::{lower_median, stratify, ComplexityRecord, Tier, Tiering, WordInterval, TIER_COUNT};
pub use trim::{apply_removal, next_removal, trim, Range, Removal, TrimOutcome, TrimTarget};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProbeError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown constraint @{tag} at {line}:{column}")]
    UnknownConstraint { tag: String, line: usize, column: usize },
    #[error("relation refers to group {index}; groups are numbered 1 to {groups}")]
    DanglingRelation { index: usize, groups: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("complexity weights must be finite and nonnegative")]
    InvalidWeights,
    #[error("stratification needs at least 10 records, got {0}")]
    TooFewRecords(usize),
    #[error("trim target infeasible ({reason}); stopped at C_task {c_task}, W {words}")]
    Infeasible { reason: String, c_task: f64, words: u32 },
    #[error("scores: {0}")]
    Scores(String),
    #[error("prompt {prompt:?} has {found} images, expected {expected}")]
    Ragged { prompt: String, found: usize, expected: usize },
    #[error("tier curve: {0}")]
    Curve(String),
    #[error("spectrum: {0}")]
    Spectrum(String),
    #[error("fit: {0}")]
    Fit(String),
}
