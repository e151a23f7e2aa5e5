use super::{a_success, ASuccessReport, EvalError, ReturnCurve};
use crate::agents::Policy;
use crate::env::{preference_reward, Action, Env, EnvConfig};
use crate::seed::{self, Rng};
use crate::worldgen::{Task, TestSuite};

pub const DEFAULT_EVAL_SEED: u64 = 0;

/// Anything that picks actions from pixels: a trained policy, a script, a human.
pub trait SuiteActor {
    fn begin(&mut self, _puzzle: usize) {}
    fn act(&mut self, pixels: &[u8], rng: &mut Rng) -> Result<usize, EvalError>;
}

/// Policies are evaluated greedily.
impl SuiteActor for Policy {
    fn act(&mut self, pixels: &[u8], rng: &mut Rng) -> Result<usize, EvalError> {
        Ok(Policy::act_greedy(self, pixels, rng)?.action)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub task: Task,
    pub suite_seed: u64,
    /// Mean credit reached within each budget `1..=N`.
    pub s: Vec<f64>,
    /// Actions each puzzle took before its episode ended.
    pub actions: Vec<u32>,
    /// Final credit of each puzzle.
    pub returns: Vec<f64>,
}

impl SuiteResult {
    pub fn score(&self) -> Result<f64, EvalError> {
        a_success(&self.s, self.s.len())
    }

    pub fn curve(&self, agent: &str) -> ReturnCurve {
        ReturnCurve { task: self.task, agent: agent.to_string(), values: self.s.clone() }
    }

    pub fn report(&self, agent: &str, finetune_steps: u64) -> Result<ASuccessReport, EvalError> {
        Ok(ASuccessReport {
            task: self.task,
            n: self.s.len(),
            score: self.score()?,
            s: self.s.clone(),
            suite_seed: self.suite_seed,
            agent: agent.to_string(),
            finetune_steps,
        })
    }
}

pub fn suite_budget(task: Task) -> Result<usize, EvalError> {
    task.action_budget()
        .map(|n| n as usize)
        .ok_or_else(|| EvalError::TaskMismatch("sandbox worlds have no action budget".into()))
}

/// Plays every puzzle for up to `n` actions. Each puzzle draws actions from its
/// own stream of `eval_seed`, so results do not depend on evaluation order.
pub fn run_suite<A: SuiteActor>(actor: &mut A, suite: &TestSuite, n: usize, eval_seed: u64) -> Result<SuiteResult, EvalError> {
    if n == 0 {
        return Err(EvalError::Invalid("N must be positive".into()));
    }
    if suite.puzzles.is_empty() {
        return Err(EvalError::Invalid("suite is empty".into()));
    }
    if let Some(p) = suite.puzzles.iter().find(|p| p.task != suite.task) {
        return Err(EvalError::TaskMismatch(format!("puzzle {} is {}, suite is {}", p.seed, p.task.name(), suite.task.name())));
    }
    let mut config = EnvConfig::for_task(suite.task);
    config.max_episode_actions = Some(n as u32);
    let mut env = Env::new(config)?;
    let mut totals = vec![0.0; n];
    let mut actions = Vec::with_capacity(suite.puzzles.len());
    let mut returns = Vec::with_capacity(suite.puzzles.len());
    for (k, puzzle) in suite.puzzles.iter().enumerate() {
        let mut rng = seed::stream(eval_seed, "eval/act", k as u64);
        actor.begin(k);
        let mut obs = env.reset(puzzle)?.pixels;
        let mut credit = 0.0;
        let mut cumulative = 0.0;
        let mut used = 0;
        for slot in totals.iter_mut() {
            if !env.is_done() {
                let a = actor.act(&obs, &mut rng)?;
                let r = env.step(Action::new(a as i64)?)?;
                used += 1;
                cumulative += r.reward;
                credit = match suite.task {
                    Task::Preferences => preference_reward(r.info.hit_high, r.info.hit_low),
                    _ => cumulative,
                };
                obs = r.observation.pixels;
            }
            *slot += credit;
        }
        actions.push(used);
        returns.push(credit);
    }
    let m = suite.puzzles.len() as f64;
    Ok(SuiteResult {
        task: suite.task,
        suite_seed: suite.suite_seed,
        s: totals.into_iter().map(|t| (t / m).clamp(0.0, 1.0)).collect(),
        actions,
        returns,
    })
}
