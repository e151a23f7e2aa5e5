mod config;

use std::fmt;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Parser, Subcommand};

use physbox::agents::{Agent, AgentSpec, Hyperparams, Policy};
use physbox::curriculum::{explore, parse_log, replay, write_log, ExploreConfig};
use physbox::eval::{emit_report, finetune, run_suite, suite_budget, FinetuneConfig, FINETUNE_LR};
use physbox::gateway::{serve, ServerConfig};
use physbox::nn::EncoderCheckpoint;
use physbox::worldgen::{make_test_suite, sample_sandbox_pool, Task, TestSuite};

use config::Config;

#[derive(Debug, Parser)]
#[command(name = "physbox", version, about = "Physics sandbox exploration and evaluation")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// TOML settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the 100-puzzle test suite for a task.
    GenSuite {
        #[arg(long)]
        task: String,
    },
    /// Open-ended exploration over a sandbox pool.
    Explore {
        #[arg(long)]
        agent: String,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        pool_size: Option<usize>,
    },
    /// PPO on a task, optionally from an exploration checkpoint.
    Finetune {
        #[arg(long)]
        task: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
        /// Suite whose seeds must stay out of training.
        #[arg(long)]
        suite: Option<PathBuf>,
    },
    /// Score a policy on a suite.
    Evaluate {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        /// Expected task; must match the suite.
        #[arg(long)]
        task: Option<String>,
        #[arg(long, default_value = "agent")]
        agent: String,
    },
    /// Serve environments over the wire protocol.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 7878)]
        port: u16,
    },
    /// Recompute every decision in an exploration log.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

/// Bad invocation rather than a runtime failure.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_task(name: &str) -> anyhow::Result<Task> {
    match Task::parse(name) {
        Some(t) if t != Task::None => Ok(t),
        _ => Err(usage(format!("unknown task {name:?}; expected goal_seeking, preferences, avoidance or tool_use"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = Config::load(cli.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::GenSuite { task } => gen_suite(out, parse_task(&task)?, cli.seed),
        Command::Explore { agent, budget, pool_size } => run_explore(out, &config, &agent, budget, pool_size, cli.seed),
        Command::Finetune { task, checkpoint, steps, suite } => {
            run_finetune(out, &config, parse_task(&task)?, checkpoint.as_deref(), steps, suite.as_deref(), cli.seed)
        }
        Command::Evaluate { policy, suite, task, agent } => evaluate(out, &policy, &suite, task.as_deref(), &agent, cli.seed),
        Command::Serve { bind, port } => {
            eprintln!("listening on {bind}:{port}");
            Ok(serve((bind.as_str(), port), ServerConfig::default())?)
        }
        Command::Replay { log } => run_replay(&log),
    }
}

fn gen_suite(out: &Path, task: Task, seed: u64) -> anyhow::Result<()> {
    let suite = make_test_suite(task, seed)?;
    let path = out.join(format!("suite_{}_{seed}.toml", task.name()));
    fs::write(&path, suite.to_text()?)?;
    println!("{}", path.display());
    Ok(())
}

fn run_explore(out: &Path, config: &Config, agent: &str, budget: Option<u64>, pool_size: Option<usize>, seed: u64) -> anyhow::Result<()> {
    let mut spec = AgentSpec::named(agent).map_err(|e| usage(e.to_string()))?;
    if spec.is_plain_ppo() {
        return Err(usage("plain PPO has no world model to explore with"));
    }
    if let Some(e) = config.encoder {
        spec.encoder = e;
    }
    if let Some(h) = &config.hyper {
        spec.hyper = h.clone();
    }
    let ex = &config.explore;
    let pool_size = pool_size.unwrap_or(ex.pool_size);
    if pool_size == 0 {
        return Err(usage("pool size must be positive"));
    }
    let explore_config = ExploreConfig {
        threshold: ex.threshold,
        budget: budget.unwrap_or(ex.budget),
        rollout: ex.rollout.unwrap_or(spec.hyper.rollout),
        checkpoint_every: ex.checkpoint_every,
        ..ExploreConfig::default()
    };
    let mut learner = Agent::new(spec, seed)?;
    let pool = sample_sandbox_pool(pool_size, seed);
    let outcome = explore(&mut learner, pool, &explore_config, |ck| {
        ck.save(out.join(format!("encoder_{}.ckpt", ck.step))).map_err(|e| physbox::curriculum::CurriculumError::InvalidConfig(e.to_string()))
    })?;
    outcome.checkpoint.save(out.join("encoder.ckpt"))?;
    write_log(fs::File::create(out.join("exploration.jsonl"))?, &outcome.log)?;
    let mut metrics = fs::File::create(out.join("metrics.jsonl"))?;
    for m in &outcome.metrics {
        writeln!(metrics, "{}", m.to_line())?;
    }
    println!(
        "steps {} terminated {} envs visited {} cells {}",
        outcome.state.total_steps,
        outcome.terminated,
        outcome.coverage.envs().len(),
        outcome.coverage.len()
    );
    Ok(())
}

fn run_finetune(
    out: &Path,
    config: &Config,
    task: Task,
    checkpoint: Option<&Path>,
    steps: Option<u64>,
    suite: Option<&Path>,
    seed: u64,
) -> anyhow::Result<()> {
    let ck = checkpoint.map(EncoderCheckpoint::load).transpose()?;
    let mut fc = FinetuneConfig::new(task, steps.unwrap_or(config.finetune.steps));
    fc.envs = config.finetune.envs;
    fc.seed = seed;
    fc.hyper = config.hyper.clone().unwrap_or(Hyperparams { lr: FINETUNE_LR, ..Hyperparams::default() });
    fc.encoder = config.encoder.or(ck.as_ref().map(|c| c.spec)).unwrap_or_default();
    if let Some(t) = &config.template {
        if t.task != task {
            return Err(usage(format!("template task {} does not match {}", t.task.name(), task.name())));
        }
        fc.template = t.clone();
    }
    if let Some(path) = suite {
        let s = load_suite(path)?;
        if s.task != task {
            return Err(usage(format!("suite task {} does not match {}", s.task.name(), task.name())));
        }
        fc.exclude_seeds = s.seeds();
    }
    let outcome = finetune(ck.as_ref(), &fc, |_, _| Ok(false))?;
    let source = ck.as_ref().map_or("ppo".to_string(), |c| c.source.clone());
    outcome.policy().save(out.join("policy.bin"), outcome.steps, &source)?;
    let mut metrics = fs::File::create(out.join("finetune_metrics.jsonl"))?;
    for m in &outcome.metrics {
        writeln!(metrics, "{}", m.to_line())?;
    }
    println!("steps {} episodes {}", outcome.steps, outcome.episode_returns.len());
    Ok(())
}

fn load_suite(path: &Path) -> anyhow::Result<TestSuite> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TestSuite::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

fn evaluate(out: &Path, policy: &Path, suite: &Path, task: Option<&str>, agent: &str, seed: u64) -> anyhow::Result<()> {
    let suite = load_suite(suite)?;
    if let Some(t) = task {
        let t = parse_task(t)?;
        if t != suite.task {
            return Err(usage(format!("suite holds {} puzzles, not {}", suite.task.name(), t.name())));
        }
    }
    let ck = EncoderCheckpoint::load(policy)?;
    let steps = ck.step;
    let mut p = Policy::from_checkpoint(&ck)?;
    let n = suite_budget(suite.task)?;
    let result = run_suite(&mut p, &suite, n, seed)?;
    let report = result.report(agent, steps)?;
    fs::write(out.join(format!("report_{}.toml", suite.task.name())), report.to_text()?)?;
    emit_report(std::slice::from_ref(&report), &[result.curve(agent)], out)?;
    println!("{} {:.6}", suite.task.name(), report.score);
    Ok(())
}

fn run_replay(path: &Path) -> anyhow::Result<()> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let records = parse_log(BufReader::new(file))?;
    let audit = replay(&records)?;
    for (step, from, to) in &audit.switches {
        println!("step {step}: switch {from} -> {to}");
    }
    if let Some(step) = audit.terminated_at {
        println!("step {step}: terminate");
    }
    println!("{} decisions, {} mismatches", audit.decisions, audit.mismatches.len());
    if !audit.is_consistent() {
        bail!("log disagrees with the switching rule at records {:?}", audit.mismatches);
    }
    Ok(())
}

