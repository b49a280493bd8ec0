//! Targeted trimming.
//!
//! Elements are removed one at a time in a fixed priority order until the
//! graph's `(C_task, W)` falls inside the target region:
//!
//! 1. attributes, lexicographically last first (ties: later group first);
//! 2. relations, last first;
//! 3. one instance from the largest group (ties: later group first), never
//!    below one instance.
//!
//! Hard constraints are never removed. Removing an attribute or a relation
//! drops one surface word; count decrements leave `W` unchanged.

use serde::{Deserialize, Serialize};

use super::{c_task, ComplexityWeights, ProbeError, SemanticGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn unbounded() -> Self {
        Range { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimTarget {
    pub c_task: Range,
    pub words: Range,
}

impl TrimTarget {
    pub fn contains(&self, g: &SemanticGraph, w: &ComplexityWeights) -> bool {
        self.c_task.contains(c_task(g, w)) && self.words.contains(f64::from(g.word_count))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Removal {
    Attribute { group: usize, attribute: String },
    Relation { index: usize },
    Instance { group: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimOutcome {
    pub graph: SemanticGraph,
    pub removals: Vec<Removal>,
    pub c_task_before: f64,
    pub c_task_after: f64,
}

/// Next element to remove, or `None` once only constraints and single
/// instances remain.
pub fn next_removal(g: &SemanticGraph) -> Option<Removal> {
    let attribute = g
        .groups
        .iter()
        .enumerate()
        .filter_map(|(i, grp)| grp.attributes.iter().next_back().map(|a| (a, i)))
        .max();
    if let Some((attribute, group)) = attribute {
        return Some(Removal::Attribute { group, attribute: attribute.clone() });
    }
    if !g.relations.is_empty() {
        return Some(Removal::Relation { index: g.relations.len() - 1 });
    }
    g.groups
        .iter()
        .enumerate()
        .filter(|(_, grp)| grp.count > 1)
        .max_by_key(|(i, grp)| (grp.count, *i))
        .map(|(group, _)| Removal::Instance { group })
}

pub fn apply_removal(g: &mut SemanticGraph, removal: &Removal) {
    match removal {
        Removal::Attribute { group, attribute } => {
            g.groups[*group].attributes.remove(attribute);
            g.word_count = g.word_count.saturating_sub(1);
        }
        Removal::Relation { index } => {
            g.relations.remove(*index);
            g.word_count = g.word_count.saturating_sub(1);
        }
        Removal::Instance { group } => g.groups[*group].count -= 1,
    }
}

pub fn trim(
    g: &SemanticGraph,
    target: &TrimTarget,
    w: &ComplexityWeights,
) -> Result<TrimOutcome, ProbeError> {
    g.validate()?;
    let before = c_task(g, w);
    let mut graph = g.clone();
    let mut removals = Vec::new();
    loop {
        let score = c_task(&graph, w);
        let words = f64::from(graph.word_count);
        if target.c_task.contains(score) && target.words.contains(words) {
            return Ok(TrimOutcome { graph, removals, c_task_before: before, c_task_after: score });
        }
        if score < target.c_task.lo || words < target.words.lo {
            return Err(ProbeError::Infeasible {
                reason: "below the target region; trimming cannot add elements".into(),
                c_task: score,
                words: graph.word_count,
            });
        }
        let Some(removal) = next_removal(&graph) else {
            return Err(ProbeError::Infeasible {
                reason: "no removable elements left".into(),
                c_task: score,
                words: graph.word_count,
            });
        };
        apply_removal(&mut graph, &removal);
        removals.push(removal);
    }
}

#[cfg(test)]
mod tests {
    use super::super::graph::example_graph;
    use super::*;

    #[test]
    fn already_inside_is_unchanged() {
        let g = example_graph();
        let w = ComplexityWeights::default();
        let target = TrimTarget { c_task: Range { lo: 0.0, hi: 100.0 }, words: Range::unbounded() };
        let out = trim(&g, &target, &w).unwrap();
        assert_eq!(out.graph, g);
        assert!(out.removals.is_empty());

        let open = TrimTarget { c_task: Range { lo: 0.0, hi: f64::INFINITY }, words: Range::unbounded() };
        assert_eq!(trim(&g, &open, &w).unwrap().graph, g);
    }

    #[test]
    fn priority_order() {
        let mut g = example_graph();
        g.groups[1].attributes.insert("blue".into());
        g.groups[0].attributes.insert("big".into());
        let mut order = Vec::new();
        while let Some(r) = next_removal(&g) {
            apply_removal(&mut g, &r);
            order.push(r);
        }
        assert_eq!(
            order,
            vec![
                Removal::Attribute { group: 0, attribute: "red".into() },
                Removal::Attribute { group: 1, attribute: "blue".into() },
                Removal::Attribute { group: 0, attribute: "big".into() },
                Removal::Relation { index: 0 },
                Removal::Instance { group: 0 },
                Removal::Instance { group: 0 },
            ]
        );
        assert_eq!(g.constraints.len(), 1);
        assert!(g.groups.iter().all(|grp| grp.count == 1));
    }

    #[test]
    fn trims_to_ten() {
        let g = example_graph();
        let w = ComplexityWeights::default();
        let target = TrimTarget { c_task: Range { lo: 0.0, hi: 10.0 }, words: Range::unbounded() };
        let out = trim(&g, &target, &w).unwrap();
        assert!(out.c_task_after <= 10.0);
        assert!(out.c_task_after < out.c_task_before);
        assert_eq!(c_task(&out.graph, &w), out.c_task_after);
    }

    #[test]
    fn infeasible_is_reported() {
        let g = example_graph();
        let w = ComplexityWeights::default();
        let target = TrimTarget { c_task: Range { lo: 0.0, hi: 1.0 }, words: Range::unbounded() };
        assert!(matches!(trim(&g, &target, &w), Err(ProbeError::Infeasible { .. })));
        let above = TrimTarget { c_task: Range { lo: 50.0, hi: 60.0 }, words: Range::unbounded() };
        assert!(matches!(trim(&g, &above, &w), Err(ProbeError::Infeasible { .. })));
    }
}
