//! Settings resolution: flags, then `SKVM_*` environment variables (both via
//! clap), then an optional JSON config file, then defaults.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use skvm_core::curriculum::{LearnerConfig, LearnerKind};
use skvm_core::learn::{GradientConfig, MctsConfig};
use skvm_core::policy::{Advisor, AlphaPolicy};
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const DEFAULT_BUDGET: usize = 10_000;
pub const DEFAULT_ITERS: usize = 500;
pub const DEFAULT_TIMEOUT_MS: u64 = 2_000;
pub const DEFAULT_MAX_GENERATIONS: usize = 4;
pub const DEFAULT_OUT_DIR: &str = "skvm-out";

/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub fuel: Option<u64>,
    pub seed: Option<u64>,
    pub learner: Option<LearnerKind>,
    pub budget: Option<usize>,
    pub iters: Option<usize>,
    pub advisor_url: Option<String>,
    pub advisor_timeout_ms: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub max_generations: Option<usize>,
    pub registry: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Values given on the command line or through the environment.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Overrides {
    pub fuel: Option<u64>,
    pub seed: Option<u64>,
    pub learner: Option<LearnerKind>,
    pub budget: Option<usize>,
    pub iters: Option<usize>,
    pub advisor_url: Option<String>,
    pub advisor_timeout_ms: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub max_generations: Option<usize>,
    pub registry: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `None` leaves each task's own fuel in place.
    pub fuel: Option<u64>,
    pub seed: u64,
    pub learner: LearnerKind,
    pub budget: usize,
    pub iters: usize,
    pub advisor_url: Option<String>,
    pub advisor_timeout: Duration,
    pub out_dir: PathBuf,
    pub max_generations: usize,
    pub registry: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(flags: Overrides, file: FileConfig) -> Result<Self> {
        let config = Self {
            fuel: flags.fuel.or(file.fuel),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            learner: flags.learner.or(file.learner).unwrap_or(LearnerKind::Mcts),
            budget: flags.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET),
            iters: flags.iters.or(file.iters).unwrap_or(DEFAULT_ITERS),
            advisor_url: flags
                .advisor_url
                .or(file.advisor_url)
                .filter(|u| !u.is_empty()),
            advisor_timeout: Duration::from_millis(
                flags
                    .advisor_timeout_ms
                    .or(file.advisor_timeout_ms)
                    .unwrap_or(DEFAULT_TIMEOUT_MS),
            ),
            out_dir: flags
                .out_dir
                .or(file.out_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            max_generations: flags
                .max_generations
                .or(file.max_generations)
                .unwrap_or(DEFAULT_MAX_GENERATIONS),
            registry: flags.registry.or(file.registry),
        };
        if config.budget == 0 {
            bail!("--budget must be at least 1");
        }
        if config.iters == 0 {
            bail!("--iters must be at least 1");
        }
        if config.max_generations == 0 {
            bail!("--max-generations must be at least 1");
        }
        Ok(config)
    }

    pub fn policy(&self) -> AlphaPolicy {
        match &self.advisor_url {
            Some(url) => AlphaPolicy::Advisor(Advisor {
                timeout: self.advisor_timeout,
                ..Advisor::new(url.clone())
            }),
            None => AlphaPolicy::Uniform,
        }
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            learner: self.learner,
            mcts: MctsConfig {
                budget: self.budget,
                seed: self.seed,
                ..MctsConfig::default()
            },
            gradient: GradientConfig {
                iters: self.iters,
                seed: self.seed,
                ..GradientConfig::default()
            },
            policy: self.policy(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beats_defaults() {
        let file = FileConfig {
            seed: Some(7),
            budget: Some(50),
            ..FileConfig::default()
        };
        let flags = Overrides {
            seed: Some(3),
            ..Overrides::default()
        };
        let c = RunConfig::resolve(flags, file).unwrap();
        assert_eq!((c.seed, c.budget, c.iters), (3, 50, DEFAULT_ITERS));
        assert_eq!(c.policy(), AlphaPolicy::Uniform);
    }

    #[test]
    fn rejects_bad_values() {
        let zero = Overrides {
            max_generations: Some(0),
            ..Overrides::default()
        };
        assert!(RunConfig::resolve(zero, FileConfig::default()).is_err());
        assert!(serde_json::from_str::<FileConfig>(r#"{"sed": 1}"#).is_err());
        assert!(serde_json::from_str::<FileConfig>(r#"{"seed": -1}"#).is_err());
    }
}
