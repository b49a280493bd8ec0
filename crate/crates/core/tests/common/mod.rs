//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clvr_core::merge::{Tensor, TensorMap};
use clvr_core::probe::{ConstraintKind, SemanticGraph, ComplexityWeights};
use clvr_core::trajectory::{Action, ImageRef, ImageSource, ReasoningStep, Trajectory};
use rand::Rng;
use serde::Deserialize;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests")
}

#[derive(Debug, Deserialize)]
pub struct ProbeRow {
    pub model: String,
    pub dit_params_b: f64,
    pub i_eff: f64,
    pub n: u32,
    pub pass: f64,
    pub median_c_task: f64,
    pub auc_pass: f64,
    pub single_step: bool,
}

pub fn probe_table() -> Vec<ProbeRow> {
    let mut rdr = csv::Reader::from_path(data_dir().join("data/probe_table.csv")).expect("probe table");
    rdr.deserialize().collect::<Result<_, _>>().expect("probe rows")
}

pub fn single_step_points() -> Vec<(f64, f64)> {
    probe_table().into_iter().filter(|r| r.single_step).map(|r| (r.i_eff, r.auc_pass)).collect()
}

/// Small checkpoint covering matrices, vectors and a scalar.
pub fn golden_checkpoint() -> TensorMap {
    let mut map = TensorMap::new();
    let seq = |n: usize, scale: f32, shift: f32| (0..n).map(|i| i as f32 * scale + shift).collect::<Vec<_>>();
    map.insert("blocks.0.attn.qkv.weight", Tensor::new(vec![6, 4], seq(24, 0.125, -1.5)).unwrap()).unwrap();
    map.insert("blocks.0.attn.qkv.bias", Tensor::new(vec![6], seq(6, -0.25, 0.5)).unwrap()).unwrap();
    map.insert("blocks.0.mlp.fc1.weight", Tensor::new(vec![3, 5], seq(15, 1.0 / 3.0, -2.0)).unwrap()).unwrap();
    map.insert("final_norm.weight", Tensor::new(vec![4], vec![1.0, f32::MIN_POSITIVE, -0.0, 1e-30]).unwrap()).unwrap();
    map.insert("logit_scale", Tensor::scalar(std::f32::consts::PI)).unwrap();
    map
}

fn image_step(index: u32, reasoning: &str, id: &str, source: ImageSource, gaps: &[&str]) -> ReasoningStep {
    ReasoningStep {
        index,
        reasoning: reasoning.into(),
        action: Action::image_gen(),
        image: Some(ImageRef::simulated(id, source)),
        passive_pass: Some(true),
        active_gaps: gaps.iter().map(|g| g.to_string()).collect(),
    }
}

/// Trajectories exercising every field of the line format.
pub fn golden_trajectories() -> Vec<Trajectory> {
    let mut a = Trajectory::new("traj-0001", "a red cube left of a blue sphere, \"sunset\" text");
    a.meta.insert("source".into(), "fixture".into());
    a.steps = vec![
        image_step(0, "Compose the cube and the sphere.", "traj-0001-00", ImageSource::Generated, &["\"sunset\" text"]),
        ReasoningStep {
            index: 1,
            reasoning: "Check the layout with a detector.".into(),
            action: Action::tool("detect"),
            image: None,
            passive_pass: None,
            active_gaps: vec![],
        },
        image_step(2, "Missing: \"sunset\" text. Edit to add it.", "traj-0001-02", ImageSource::Edited, &[]),
        ReasoningStep {
            index: 3,
            reasoning: "Everything is in place.".into(),
            action: Action::terminate(),
            image: None,
            passive_pass: None,
            active_gaps: vec![],
        },
    ];
    a.terminated = true;

    let mut b = Trajectory::new("traj-0002", "unicode: café ☕ under a tree");
    let mut img = ImageRef::simulated("traj-0002-00", ImageSource::Generated);
    img.uri = Some("file:///images/traj-0002-00.png".into());
    b.steps = vec![ReasoningStep {
        index: 0,
        reasoning: "Single pass.\nSecond line.".into(),
        action: Action::image_gen(),
        image: Some(img),
        passive_pass: Some(true),
        active_gaps: vec![],
    }];
    vec![a, b]
}

/// Random checkpoint with up to `max_tensors` tensors of up to 64×64.
pub fn random_checkpoint<R: Rng>(rng: &mut R, max_tensors: usize) -> TensorMap {
    let n = rng.random_range(1..=max_tensors);
    let mut map = TensorMap::new();
    for i in 0..n {
        let shape = match rng.random_range(0..4) {
            0 => vec![rng.random_range(1..=64)],
            _ => vec![rng.random_range(1..=64), rng.random_range(1..=64)],
        };
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.random_range(-2.0f32..2.0)).collect();
        map.insert(format!("layer{i:02}.w"), Tensor::new(shape, data).unwrap()).unwrap();
    }
    map
}

/// Element-wise `base · (1 + δ)`, `|δ| ≤ rel`, like a light fine-tune.
pub fn perturbed<R: Rng>(rng: &mut R, base: &TensorMap, rel: f32) -> TensorMap {
    TensorMap::from_entries(base.iter().map(|(name, t)| {
        let data = t.data().iter().map(|&v| v * (1.0 + rng.random_range(-rel..=rel))).collect();
        (name.clone(), Tensor::new(t.shape().to_vec(), data).unwrap())
    }))
    .unwrap()
}

pub fn random_graph<R: Rng>(rng: &mut R) -> SemanticGraph {
    let words = ["red", "blue", "big", "shiny", "wooden", "striped", "tiny"];
    let labels = ["cat", "cube", "tree", "car", "lamp"];
    let groups = rng.random_range(0..6);
    let mut g = SemanticGraph::default();
    for _ in 0..groups {
        let attributes: BTreeSet<String> =
            (0..rng.random_range(0..4)).map(|_| words[rng.random_range(0..words.len())].to_string()).collect();
        g.groups.push(clvr_core::probe::EntityGroup {
            label: labels[rng.random_range(0..labels.len())].into(),
            count: rng.random_range(1..=6),
            attributes,
        });
    }
    if groups > 0 {
        for _ in 0..rng.random_range(0..5) {
            g.relations.push(clvr_core::probe::Relation {
                from: rng.random_range(0..groups),
                word: "near".into(),
                to: rng.random_range(0..groups),
            });
        }
    }
    for _ in 0..rng.random_range(0..5) {
        let kind = ConstraintKind::ALL[rng.random_range(0..4)];
        g.constraints.push(clvr_core::probe::Constraint { kind, arg: None });
    }
    g.word_count = rng.random_range(0..80);
    g
}

pub fn random_weights<R: Rng>(rng: &mut R) -> ComplexityWeights {
    ComplexityWeights {
        alpha: rng.random_range(0.0..3.0),
        beta: rng.random_range(0.0..3.0),
        gamma_w: rng.random_range(0.0..3.0),
        c_global: rng.random_range(0.0..3.0),
        c_count: rng.random_range(0.0..3.0),
        c_text: rng.random_range(0.0..3.0),
        c_neg: rng.random_range(0.0..3.0),
        ..ComplexityWeights::default()
    }
}

/// Counts every instance and every attribute binding one at a time.
pub fn oracle_counts(g: &SemanticGraph) -> (u64, u64, u64) {
    let mut nodes = 0;
    let mut attr = 0;
    for group in &g.groups {
        for _ in 0..group.count {
            nodes += 1;
            for _ in &group.attributes {
                attr += 1;
            }
        }
    }
    let mut edges = attr;
    for _ in &g.relations {
        edges += 1;
    }
    (nodes, attr, edges)
}

pub fn oracle_r_extra(g: &SemanticGraph, w: &ComplexityWeights) -> f64 {
    let mut total = 0.0;
    for c in &g.constraints {
        total += match c.kind {
            ConstraintKind::Global => w.c_global,
            ConstraintKind::Count => w.c_count,
            ConstraintKind::Text => w.c_text,
            ConstraintKind::Neg => w.c_neg,
        };
    }
    total
}

pub fn oracle_c_task(g: &SemanticGraph, w: &ComplexityWeights) -> f64 {
    let (n, _, e) = oracle_counts(g);
    let n = n as f64;
    w.alpha * n * (1.0 + n).ln() + w.beta * e as f64 + w.gamma_w * (1.0 + f64::from(g.word_count)).ln() + oracle_r_extra(g, w)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Brute-force per-prompt (pass fraction, mean recall).
pub fn oracle_aggregate(rows: &[(String, u64, f64, bool)]) -> BTreeMap<String, (f64, f64)> {
    let ids: BTreeSet<&String> = rows.iter().map(|r| &r.0).collect();
    ids.into_iter()
        .map(|id| {
            let mine: Vec<_> = rows.iter().filter(|r| &r.0 == id).collect();
            let k = mine.len() as f64;
            let pass = mine.iter().filter(|r| r.3).count() as f64 / k;
            let recall = mine.iter().map(|r| r.2).sum::<f64>() / k;
            (id.clone(), (pass, recall))
        })
        .collect()
}
