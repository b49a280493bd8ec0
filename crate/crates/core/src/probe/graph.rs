use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ProbeError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityGroup {
    pub label: String,
    /// Number of instances `c_j`, at least 1.
    pub count: u32,
    #[serde(default)]
    pub attributes: BTreeSet<String>,
}

/// Relation between two groups. Indices are 0-based into `groups`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub from: usize,
    pub word: String,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Global,
    Count,
    Text,
    Neg,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 4] =
        [ConstraintKind::Global, ConstraintKind::Count, ConstraintKind::Text, ConstraintKind::Neg];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub kind: ConstraintKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg: Option<String>,
}

/// Semantic dependency graph of one prompt: entity groups with attribute
/// bindings, inter-group relations, hard constraints and the surface word count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticGraph {
    #[serde(default)]
    pub groups: Vec<EntityGroup>,
    #[serde(default)]
    pub relations: Vec<Relation>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    #[serde(default)]
    pub word_count: u32,
}

impl SemanticGraph {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if let Some(g) = self.groups.iter().find(|g| g.count == 0) {
            return Err(ProbeError::InvalidGraph(format!("group {:?} has count 0", g.label)));
        }
        for r in &self.relations {
            for idx in [r.from, r.to] {
                if idx >= self.groups.len() {
                    return Err(ProbeError::DanglingRelation { index: idx + 1, groups: self.groups.len() });
                }
            }
        }
        Ok(())
    }

    pub fn constraint_count(&self, kind: ConstraintKind) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEdgeCounts {
    pub nodes: u64,
    pub attribute_edges: u64,
    pub edges: u64,
}

/// `N = Σ c_j`, `E_attr = Σ c_j·|A_j|`, `E = E_attr + |E_rel|`.
pub fn node_edge_counts(g: &SemanticGraph) -> NodeEdgeCounts {
    let nodes = g.groups.iter().map(|grp| u64::from(grp.count)).sum();
    let attribute_edges = g
        .groups
        .iter()
        .map(|grp| u64::from(grp.count) * grp.attributes.len() as u64)
        .sum::<u64>();
    NodeEdgeCounts { nodes, attribute_edges, edges: attribute_edges + g.relations.len() as u64 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplexityWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_w: f64,
    pub c_global: f64,
    pub c_count: f64,
    pub c_text: f64,
    pub c_neg: f64,
    pub log_base: LogBase,
}

impl Default for ComplexityWeights {
    fn default() -> Self {
        ComplexityWeights {
            alpha: 1.0,
            beta: 1.0,
            gamma_w: 1.0,
            c_global: 0.5,
            c_count: 2.0,
            c_text: 3.0,
            c_neg: 1.5,
            log_base: LogBase::Natural,
        }
    }
}

impl ComplexityWeights {
    pub fn validate(&self) -> Result<(), ProbeError> {
        let all = [self.alpha, self.beta, self.gamma_w, self.c_global, self.c_count, self.c_text, self.c_neg];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(ProbeError::InvalidWeights);
        }
        Ok(())
    }

    pub fn constraint_weight(&self, kind: ConstraintKind) -> f64 {
        match kind {
            ConstraintKind::Global => self.c_global,
            ConstraintKind::Count => self.c_count,
            ConstraintKind::Text => self.c_text,
            ConstraintKind::Neg => self.c_neg,
        }
    }
}

/// `Σ_type c_type · n_type` over the hard constraints.
pub fn r_extra(g: &SemanticGraph, w: &ComplexityWeights) -> f64 {
    ConstraintKind::ALL
        .iter()
        .map(|&k| w.constraint_weight(k) * g.constraint_count(k) as f64)
        .sum()
}

/// `α·N·log(1+N) + β·E + γ_w·log(1+W) + R_extra`.
pub fn c_task(g: &SemanticGraph, w: &ComplexityWeights) -> f64 {
    let counts = node_edge_counts(g);
    let n = counts.nodes as f64;
    w.alpha * n * w.log_base.log(1.0 + n)
        + w.beta * counts.edges as f64
        + w.gamma_w * w.log_base.log(1.0 + f64::from(g.word_count))
        + r_extra(g, w)
}

#[cfg(test)]
pub(crate) fn example_graph() -> SemanticGraph {
    SemanticGraph {
        groups: vec![
            EntityGroup { label: "cube".into(), count: 3, attributes: ["red".to_string()].into() },
            EntityGroup { label: "sphere".into(), count: 1, attributes: BTreeSet::new() },
        ],
        relations: vec![Relation { from: 0, word: "left_of".into(), to: 1 }],
        constraints: vec![Constraint { kind: ConstraintKind::Count, arg: None }],
        word_count: 8,
    }
}
