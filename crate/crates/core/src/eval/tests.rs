use std::collections::BTreeMap;

use rand::{Rng as _, SeedableRng};

use super::*;
use crate::agents::{Agent, AgentSpec, Policy};
use crate::env::{Action, Env, EnvConfig};
use crate::nn::{ConvLayerSpec, EncoderSpec};
use crate::seed::Rng;
use crate::sim::BodyKind;
use crate::worldgen::{make_test_suite_from, PuzzleConfig, Task, TestSuite};

/// Term-by-term weighted average, no telescoping.
fn naive(s: &[f64], log: impl Fn(f64) -> f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, v) in s.iter().enumerate() {
        let i = (k + 1) as f64;
        let a = log(i + 1.0) - log(i);
        num += a * v;
        den += a;
    }
    num / den
}

fn small_goal_suite(size: usize, seed: u64) -> TestSuite {
    let mut t = PuzzleConfig::for_task(Task::GoalSeeking, 0);
    t.table_half_extent = 1.0;
    t.counts.remove(&BodyKind::CubeHeavy);
    t.counts.remove(&BodyKind::CubeLight);
    make_test_suite_from(&t, seed, size).unwrap()
}

fn tiny_encoder() -> EncoderSpec {
    EncoderSpec {
        conv: [ConvLayerSpec::new(4, 8, 4), ConvLayerSpec::new(4, 4, 2), ConvLayerSpec::new(4, 3, 1)],
        latent_dim: 8,
        ..EncoderSpec::default()
    }
}

#[test]
fn constant_vectors_score_at_the_bounds() {
    assert_eq!(a_success(&[1.0; 100], 100).unwrap(), 1.0);
    assert_eq!(a_success(&[0.0; 200], 200).unwrap(), 0.0);
}

#[test]
fn hand_case_matches_closed_form() {
    let mut s = vec![1.0; 100];
    s[0] = 0.0;
    let got = a_success(&s, 100).unwrap();
    assert!((got - 0.84981).abs() < 1e-4);
    assert!((got - (101f64.ln() - 2f64.ln()) / 101f64.ln()).abs() < 1e-12);
    assert!((got - naive(&s, f64::ln)).abs() < 1e-12);
}

#[test]
fn random_vectors_match_naive_sum_in_any_base() {
    let mut rng = Rng::seed_from_u64(11);
    for k in 0..1000 {
        let n = if k % 2 == 0 { 100 } else { 200 };
        let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let got = a_success(&s, n).unwrap();
        assert!((got - naive(&s, f64::ln)).abs() < 1e-12);
        assert!((got - naive(&s, f64::log2)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn invalid_vectors_are_rejected() {
    assert!(matches!(a_success(&[0.5; 99], 100), Err(EvalError::Length { expected: 100, got: 99 })));
    let mut s = vec![0.5; 100];
    s[7] = 1.5;
    assert!(matches!(a_success(&s, 100), Err(EvalError::OutOfRange { index: 8, .. })));
    s[7] = f64::NAN;
    assert!(a_success(&s, 100).is_err());
    assert!(a_success(&[], 0).is_err());
}

#[test]
fn dominance_and_early_solves_raise_the_score() {
    let mut rng = Rng::seed_from_u64(5);
    for _ in 0..200 {
        let lo: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 0.5).collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + rng.random::<f64>() * 0.5).collect();
        assert!(a_success(&hi, 100).unwrap() >= a_success(&lo, 100).unwrap());
        let (i, j) = (rng.random_range(1..100), rng.random_range(0..100));
        let j = j.min(i - 1);
        let mut late = vec![0.0; 100];
        late[i] = 1.0;
        let mut early = vec![0.0; 100];
        early[j] = 1.0;
        assert!(a_success(&early, 100).unwrap() > a_success(&late, 100).unwrap());
    }
}

#[test]
fn seeker_suite_matches_replayed_solve_histogram() {
    let suite = small_goal_suite(12, 3);
    let n = 100;
    let res = run_suite(&mut ColorSeeker::default(), &suite, n, 0).unwrap();
    let mut solved_at = Vec::new();
    for p in &suite.puzzles {
        let mut env = Env::new(EnvConfig::for_task(Task::GoalSeeking)).unwrap();
        let mut obs = env.reset(p).unwrap().pixels;
        let mut actor = ColorSeeker::default();
        let mut rng = Rng::seed_from_u64(0);
        let mut hit = None;
        for k in 1..=n {
            let a = actor.act(&obs, &mut rng).unwrap();
            let r = env.step(Action::new(a as i64).unwrap()).unwrap();
            obs = r.observation.pixels;
            if r.reward > 0.0 {
                hit = Some(k);
                break;
            }
            if r.done {
                break;
            }
        }
        solved_at.push(hit);
    }
    let expected: Vec<f64> = (1..=n)
        .map(|i| solved_at.iter().filter(|h| h.is_some_and(|k| k <= i)).count() as f64 / suite.puzzles.len() as f64)
        .collect();
    assert_eq!(res.s, expected);
    assert!(solved_at.iter().filter(|h| h.is_some()).count() >= 8, "{solved_at:?}");
    assert!((res.score().unwrap() - naive(&expected, f64::ln)).abs() < 1e-12);
}

#[test]
fn single_action_budget_scores_zero() {
    let suite = small_goal_suite(10, 1);
    let res = run_suite(&mut ColorSeeker::default(), &suite, 1, 0).unwrap();
    assert_eq!(res.s, vec![0.0]);
    assert_eq!(res.score().unwrap(), 0.0);
}

#[test]
fn suite_evaluation_is_deterministic() {
    let suite = small_goal_suite(5, 2);
    let policy = Policy::new(tiny_encoder(), &mut crate::seed::stream(1, "p", 0)).unwrap();
    let a = run_suite(&mut policy.clone(), &suite, 30, 9).unwrap();
    let b = run_suite(&mut policy.clone(), &suite, 30, 9).unwrap();
    assert_eq!(a, b);
    let c = run_suite(&mut UniformActor, &suite, 30, 9).unwrap();
    let d = run_suite(&mut UniformActor, &suite, 30, 9).unwrap();
    assert_eq!(c, d);
}

#[test]
fn preference_credit_accrues_by_budget() {
    let mut t = PuzzleConfig::for_task(Task::Preferences, 0);
    t.table_half_extent = 1.0;
    t.counts.remove(&BodyKind::CubeHeavy);
    t.counts.remove(&BodyKind::CubeLight);
    let suite = make_test_suite_from(&t, 4, 8).unwrap();
    let res = run_suite(&mut ColorSeeker { target: crate::env::raster::palette::GOAL_HIGH }, &suite, 100, 0).unwrap();
    assert!(res.s.windows(2).all(|w| w[0] <= w[1]));
    assert!(res.returns.iter().all(|r| [0.0, 0.2, 0.8, 1.0].contains(r)));
    assert!(res.returns.iter().any(|r| *r >= 0.8), "{:?}", res.returns);
    assert_eq!(*res.s.last().unwrap(), res.returns.iter().sum::<f64>() / 8.0);
}

#[test]
fn run_suite_rejects_mixed_tasks() {
    let mut suite = small_goal_suite(3, 1);
    suite.puzzles[1] = PuzzleConfig::for_task(Task::Avoidance, 5);
    assert!(matches!(run_suite(&mut UniformActor, &suite, 10, 0), Err(EvalError::TaskMismatch(_))));
    assert!(suite_budget(Task::None).is_err());
    assert_eq!(suite_budget(Task::ToolUse).unwrap(), 200);
}

#[test]
fn report_text_round_trips_and_checks_score() {
    let suite = small_goal_suite(4, 1);
    let r = run_suite(&mut ColorSeeker::default(), &suite, 100, 0).unwrap().report("seeker", 0).unwrap();
    let text = r.to_text().unwrap();
    assert_eq!(ASuccessReport::from_text(&text).unwrap(), r);
    let mut bad = r.clone();
    bad.score = (bad.score + 0.1).min(1.0) - 0.05;
    assert!(ASuccessReport::from_text(&bad.to_text().unwrap()).is_err());
}

fn report(agent: &str, task: Task, score: f64, n: usize) -> (ASuccessReport, ReturnCurve) {
    let s = vec![score; n];
    let r = ASuccessReport { task, n, score: a_success(&s, n).unwrap(), s: s.clone(), suite_seed: 0, agent: agent.into(), finetune_steps: 0 };
    (r, ReturnCurve { task, agent: agent.into(), values: s })
}

#[test]
fn emitted_tables_hold_population_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let (one, c1) = report("icm", Task::GoalSeeking, 0.5, 100);
    let files = emit_report(&[one], &[c1], dir.path()).unwrap();
    let text = std::fs::read_to_string(&files.table).unwrap();
    assert_eq!(text, "agent,task,seeds,mean,std\nicm,goal_seeking,1,0.500000,0.000000\n");

    let runs: Vec<_> = [0.2, 0.4, 0.9].iter().map(|v| report("rnd", Task::ToolUse, *v, 200)).collect();
    let (reports, curves): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let files = emit_report(&reports, &curves, dir.path()).unwrap();
    let text = std::fs::read_to_string(&files.table).unwrap();
    let mean = 0.5;
    let std = ((0.09 + 0.01 + 0.16) / 3.0f64).sqrt();
    assert_eq!(text.lines().nth(1).unwrap(), format!("rnd,tool_use,3,{mean:.6},{std:.6}"));
    let curve = std::fs::read_to_string(&files.curves[0]).unwrap();
    assert_eq!(curve.lines().count(), 201);
    assert_eq!(curve.lines().next().unwrap(), "budget,rnd");
    assert!(emit_report(&[], &[], dir.path()).is_err());
    assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
}

#[test]
fn training_seeds_avoid_the_suite() {
    let suite = small_goal_suite(20, 0);
    let mut config = FinetuneConfig::new(Task::GoalSeeking, 64);
    config.template = suite.puzzles[0].with_seed(0);
    config.encoder = tiny_encoder();
    config.hyper.rollout = 32;
    config.hyper.minibatch = 16;
    config.hyper.epochs = 1;
    config.envs = 4;
    config.exclude_seeds = suite.seeds();
    let out = finetune(None, &config, |_, _| Ok(false)).unwrap();
    assert_eq!(out.steps, 64);
    assert_eq!(out.metrics.len(), 2);
    assert!(out.train_seeds.is_disjoint(&suite.seeds()));

    let mut cursor = 0;
    let first = training_puzzle(&config.template, 0, &mut cursor, &Default::default()).unwrap();
    let mut cursor = 0;
    let skip = [first.seed].into_iter().collect();
    assert_ne!(training_puzzle(&config.template, 0, &mut cursor, &skip).unwrap().seed, first.seed);
}

#[test]
fn zero_step_finetune_is_untrained_and_loads_checkpoints() {
    let mut spec = AgentSpec::named("rnd").unwrap();
    spec.encoder = tiny_encoder();
    let explorer = Agent::new(spec, 4).unwrap();
    let ck = explorer.checkpoint(10, "rnd");
    let mut config = FinetuneConfig::new(Task::GoalSeeking, 0);
    config.encoder = tiny_encoder();
    let out = finetune(Some(&ck), &config, |_, _| Ok(false)).unwrap();
    assert_eq!(out.steps, 0);
    assert!(out.metrics.is_empty());
    let again = out.agent.checkpoint(10, "rnd");
    assert_eq!(again.weight_blob(), ck.weight_blob());
    let probs = out.policy().probabilities(&[&vec![100u8; crate::env::OBS_LEN][..]]).unwrap();
    assert!(probs[0].iter().all(|p| (p - 0.125).abs() < 0.05));

    config.encoder = EncoderSpec::default();
    assert!(finetune(Some(&ck), &config, |_, _| Ok(false)).is_err());
    let mut sandbox = config.clone();
    sandbox.template = PuzzleConfig::sandbox(1, []);
    assert!(matches!(finetune(None, &sandbox, |_, _| Ok(false)), Err(EvalError::TaskMismatch(_))));
}

#[test]
fn observer_can_stop_training() {
    let mut config = FinetuneConfig::new(Task::GoalSeeking, 1000);
    config.template = small_goal_suite(1, 0).puzzles[0].clone();
    config.encoder = tiny_encoder();
    config.hyper.rollout = 16;
    config.hyper.minibatch = 8;
    config.hyper.epochs = 1;
    config.envs = 2;
    let mut calls = BTreeMap::new();
    let out = finetune(None, &config, |steps, _| {
        calls.insert(steps, ());
        Ok(steps >= 32)
    })
    .unwrap();
    assert_eq!(out.steps, 32);
    assert_eq!(calls.len(), 2);
}
