use std::path::Path;

use anyhow::Context as _;
use serde::Deserialize;

use physbox::agents::Hyperparams;
use physbox::curriculum::{DEFAULT_BUDGET, DEFAULT_THRESHOLD};
use physbox::nn::EncoderSpec;
use physbox::worldgen::PuzzleConfig;

/// Optional settings file shared by every subcommand.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub encoder: Option<EncoderSpec>,
    pub hyper: Option<Hyperparams>,
    pub explore: ExploreSection,
    pub finetune: FinetuneSection,
    /// Recipe for fine-tuning puzzles; the task defaults apply when absent.
    pub template: Option<PuzzleConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreSection {
    pub pool_size: usize,
    pub threshold: f64,
    pub budget: u64,
    pub rollout: Option<usize>,
    pub checkpoint_every: u64,
}

impl Default for ExploreSection {
    fn default() -> Self {
        Self { pool_size: 20, threshold: DEFAULT_THRESHOLD, budget: DEFAULT_BUDGET, rollout: None, checkpoint_every: 100_000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSection {
    pub steps: u64,
    pub envs: usize,
}

impl Default for FinetuneSection {
    fn default() -> Self {
        Self { steps: 1_000_000, envs: 8 }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }
}
