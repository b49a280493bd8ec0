use std::collections::BTreeSet;

use rand::Rng;

use super::*;
use crate::rng::{item_stream, seeded, StreamRng};
use crate::trajectory::{validate_trajectory, Action, ValidationOptions};

fn prompt(id: &str, n: usize) -> PromptSpec {
    let requirements: Vec<String> = (0..n).map(|i| format!("item{i}")).collect();
    PromptSpec { id: id.into(), text: requirements.join(", "), requirements }
}

fn env(q: f64, agree: f64) -> SimEnv {
    SimEnv::new(SimEnvConfig { per_item_success_prob: q, judge_agreement_prob: agree, ..Default::default() }).unwrap()
}

#[test]
fn perfect_generator_yields_trajectory() {
    let env = env(1.0, 1.0);
    let out = run_episode(&prompt("p", 4), env.adapters(), &EngineConfig::default(), &mut seeded(42)).unwrap();
    let traj = out.trajectory.expect("retained");
    assert!((1..=8).contains(&traj.image_count()));
    assert!(traj.image_steps().all(|s| s.passive_pass == Some(true)));
    assert!(validate_trajectory(&traj, ValidationOptions::retained()).is_valid());
    assert_eq!(out.log.path.last(), Some(&ControllerState::Finalize));
    assert_eq!(traj.final_image(), out.canvas.as_ref().map(|c| &c.image));
}

#[test]
fn failing_generator_is_discarded_by_the_gate() {
    let env = env(0.0, 1.0);
    let out = run_episode(&prompt("p", 3), env.adapters(), &EngineConfig::default(), &mut seeded(1)).unwrap();
    assert!(out.trajectory.is_none());
    assert_eq!(out.log.discard, Some(DiscardReason::PassiveFailure));
    assert_eq!(out.log.path.last(), Some(&ControllerState::Failed));
}

#[test]
fn zero_budget_fails_immediately() {
    let env = env(1.0, 1.0);
    let cfg = EngineConfig { budget: RetryBudget::uniform(0), ..Default::default() };
    let out = run_episode(&prompt("p", 3), env.adapters(), &cfg, &mut seeded(1)).unwrap();
    assert!(out.trajectory.is_none());
    assert_eq!(out.log.discard, Some(DiscardReason::Budget));
    assert_eq!(out.log.iterations, 0);
}

#[test]
fn tool_faults_are_retried_within_budget() {
    let env = SimEnv::new(SimEnvConfig { per_item_success_prob: 1.0, tool_fault_prob: 0.5, ..Default::default() }).unwrap();
    let cfg = EngineConfig::default();
    let mut saw_retry = false;
    for i in 0..200 {
        let out = run_episode(&prompt("p", 4), env.adapters(), &cfg, &mut item_stream(3, i)).unwrap();
        saw_retry |= out.log.events.iter().any(|e| matches!(e, Event::GenFail | Event::EditFail));
        for (state, used) in &out.log.peak_budget {
            assert!(*used <= cfg.budget.limit(*state));
        }
        match out.log.discard {
            None | Some(DiscardReason::Budget) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
    assert!(saw_retry);
}

#[test]
fn iteration_cap_discards_long_plans() {
    let env = SimEnv::new(SimEnvConfig {
        per_item_success_prob: 1.0,
        min_deferred: 9,
        max_deferred: 9,
        ..Default::default()
    })
    .unwrap();
    let out = run_episode(&prompt("p", 12), env.adapters(), &EngineConfig::default(), &mut seeded(0)).unwrap();
    assert_eq!(out.log.discard, Some(DiscardReason::Budget));
    assert_eq!(out.log.iterations, 8);
    let cfg = EngineConfig { max_iterations: 9, ..Default::default() };
    assert!(run_episode(&prompt("p", 12), env.adapters(), &cfg, &mut seeded(0)).is_err());
}

struct Broken;

impl Generator for Broken {
    fn generate(&self, _: &Instruction, _: Option<&Canvas>, _: &str, _: &mut StreamRng) -> Result<Option<Canvas>, AdapterError> {
        Err(AdapterError("connection reset".into()))
    }
}

#[test]
fn adapter_fault_is_fail_mid() {
    let env = env(1.0, 1.0);
    let adapters = AgentAdapters { generator: &Broken, ..env.adapters() };
    let out = run_episode(&prompt("p", 2), adapters, &EngineConfig::default(), &mut seeded(0)).unwrap();
    assert!(out.log.fail_mid);
    assert_eq!(out.log.discard, Some(DiscardReason::FormatViolation));
    assert!(out.log.message.unwrap().starts_with("FAIL(mid)"));
}

#[test]
fn deferred_active_checks_still_finish() {
    let env = SimEnv::new(SimEnvConfig { per_item_success_prob: 1.0, min_deferred: 3, max_deferred: 3, ..Default::default() }).unwrap();
    let cfg = EngineConfig { active_verify: ActiveVerifyMode::PlanExhausted, ..Default::default() };
    let out = run_episode(&prompt("p", 5), env.adapters(), &cfg, &mut seeded(0)).unwrap();
    assert_eq!(out.trajectory.unwrap().image_count(), 4);
}

#[test]
fn sim_verifiers() {
    let env = env(1.0, 1.0);
    let p = prompt("p", 3);
    let canvas = Canvas {
        image: crate::trajectory::ImageRef::simulated("x", crate::trajectory::ImageSource::Generated),
        satisfied: BTreeSet::from(["item0".to_string()]),
    };
    let mut rng = seeded(0);
    let report = active_verify(&canvas, &p, &env, &mut rng).unwrap();
    assert_eq!(report.gaps, vec!["item1", "item2"]);
    assert_eq!(report, active_verify(&canvas, &p, &env, &mut rng).unwrap());
    let mut one = Checklist::new(vec!["item0".into()]);
    assert!(passive_verify(&canvas, &mut one, &env, &mut rng).unwrap());
    let mut two = Checklist::new(vec!["item0".into(), "item1".into()]);
    assert!(!passive_verify(&canvas, &mut two, &env, &mut rng).unwrap());
    assert_eq!(two.satisfied(), &[true, false]);
    assert!(passive_verify(&canvas, &mut Checklist::new(vec![]), &env, &mut rng).is_err());
}

#[test]
fn synthesis_extremes() {
    let prompts: Vec<_> = (0..50).map(|i| prompt(&format!("p{i}"), 1 + i % 5)).collect();
    let all = synthesize_dataset(&prompts, env(1.0, 1.0).adapters(), &EngineConfig::default(), 7, None).unwrap();
    assert_eq!(all.stats.retention_rate, 1.0);
    assert_eq!(all.stats.iteration_histogram.values().sum::<u64>(), 50);
    let none = synthesize_dataset(&prompts, env(0.0, 1.0).adapters(), &EngineConfig::default(), 7, None).unwrap();
    assert_eq!(none.stats.retention_rate, 0.0);
    assert_eq!(none.stats.discard_reasons[&DiscardReason::PassiveFailure], 50);
    assert!(synthesize_dataset(&[], env(1.0, 1.0).adapters(), &EngineConfig::default(), 7, None).is_err());
}

#[test]
fn synthesis_independent_of_threads() {
    let prompts: Vec<_> = (0..64).map(|i| prompt(&format!("p{i}"), 1 + i % 6)).collect();
    let e = env(0.8, 0.7);
    let a = synthesize_dataset(&prompts, e.adapters(), &EngineConfig::default(), 7, Some(1)).unwrap();
    let b = synthesize_dataset(&prompts, e.adapters(), &EngineConfig::default(), 7, Some(4)).unwrap();
    assert_eq!(a.trajectories, b.trajectories);
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.logs, b.logs);
    let discarded: u64 = a.stats.discard_reasons.values().sum();
    assert_eq!(discarded + a.stats.retained, a.stats.attempted);
}

struct Script(Vec<bool>);

impl Planner for Script {
    fn decide(&self, ctx: &PlannerContext<'_>, _: &mut StreamRng) -> Result<Decision, AdapterError> {
        let gen = self.0.get(ctx.history.len()).copied().unwrap_or(false);
        Ok(Decision {
            reasoning: format!("step {}", ctx.history.len()),
            action: if gen { Action::image_gen() } else { Action::terminate() },
            instruction: gen.then(|| Instruction { text: "x".into(), targets: vec!["item0".into()] }),
        })
    }
}

#[test]
fn inference_loop_contract() {
    let env = env(1.0, 1.0);
    let p = prompt("p", 1);
    let out = run_inference(&p, &Script(vec![]), &env, 8, &mut seeded(0)).unwrap();
    assert_eq!(out.trajectory.steps.len(), 1);
    assert!(out.final_image.is_none());

    let out = run_inference(&p, &Script(vec![true, true]), &env, 8, &mut seeded(0)).unwrap();
    assert_eq!(out.trajectory.image_count(), 2);
    assert_eq!(out.final_image.as_ref(), out.trajectory.final_image());
    assert_eq!(out.final_image.unwrap().id, "p-01");

    let out = run_inference(&p, &Script(vec![true; 20]), &env, 8, &mut seeded(0)).unwrap();
    assert_eq!(out.trajectory.image_count(), 8);
    assert_eq!(out.trajectory.steps.last().unwrap().reasoning, CAP_REASONING);
    assert!(run_inference(&p, &Script(vec![]), &env, 0, &mut seeded(0)).is_err());
}

/// Re-derives the simulated planner and generator draws by hand.
fn replay_iterations(p: &PromptSpec, cfg: &SimEnvConfig, max: usize, rng: &mut StreamRng) -> usize {
    let n = p.requirements.len();
    let deferred = rng.random_range(cfg.min_deferred..=cfg.max_deferred);
    let base = n - deferred.min(n - 1);
    let mut have = vec![false; n];
    for slot in have.iter_mut().take(base) {
        *slot = rng.random::<f64>() < cfg.per_item_success_prob;
    }
    let mut images = 1;
    while images < max {
        let Some(next) = have.iter().position(|h| !h) else { break };
        have[next] = rng.random::<f64>() < cfg.per_item_success_prob;
        images += 1;
    }
    images
}

#[test]
fn sim_inference_matches_replay() {
    let cfg = SimEnvConfig { per_item_success_prob: 0.6, ..Default::default() };
    let env = SimEnv::new(cfg.clone()).unwrap();
    for n in 1..8 {
        let p = prompt("p", n);
        let got = run_inference(&p, &env, &env, 8, &mut seeded(11)).unwrap().trajectory.image_count();
        assert_eq!(got, replay_iterations(&p, &cfg, 8, &mut seeded(11)), "n = {n}");
    }
}
