use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::envs::{parse_f64, parse_usize, EnvConfig, EnvKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub env_config: EnvConfig,
    pub agent: AgentConfig,
    pub trials: usize,
    /// `None` selects the environment's default episode count.
    pub episodes: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::CartPole,
            env_config: EnvConfig::default(),
            agent: AgentConfig::default(),
            trials: 50,
            episodes: None,
            seed: 0,
            out: PathBuf::from("out"),
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn episodes(&self) -> usize {
        self.episodes.unwrap_or_else(|| self.env.default_episodes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.episodes() == 0 {
            return Err(Error::Config("episodes must be >= 1".into()));
        }
        self.agent.validate()?;
        self.env_config.validate()
    }

    /// Applies one `key = value` setting. Keys mirror the CLI flags (with `_`
    /// instead of `-`); environment constants use `cartpole.*` / `acrobot.*`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "env" => self.env = value.parse()?,
            "mode" => self.agent.mode = value.parse()?,
            "kappa" => self.agent.hyper.kappa = parse_f64(key, value)?,
            "exponent" => self.agent.hyper.exponent = parse_f64(key, value)?,
            "beta" => self.agent.hyper.beta = parse_f64(key, value)?,
            "gamma_r" => self.agent.gamma_reward = parse_f64(key, value)?,
            "gamma_q" => self.agent.gamma_punish = parse_f64(key, value)?,
            "critic_lr" => self.agent.critic_lr = parse_f64(key, value)?,
            "actor_lr" => self.agent.actor_lr = parse_f64(key, value)?,
            "ema_rate" => self.agent.ema_rate = parse_f64(key, value)?,
            "init_scale" => self.agent.init_scale = parse_f64(key, value)?,
            "hidden" => self.agent.hidden = parse_usize(key, value)?,
            "compensate" => {
                self.agent.compensate = value
                    .parse()
                    .map_err(|_| Error::Config(format!("compensate: expected true or false, got {value:?}")))?
            }
            "trials" => self.trials = parse_usize(key, value)?,
            "episodes" => self.episodes = Some(parse_usize(key, value)?),
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|e| Error::Config(format!("seed: cannot parse {value:?}: {e}")))?
            }
            "out" => self.out = PathBuf::from(value),
            "jobs" => self.jobs = parse_usize(key, value)?,
            _ if key.contains('.') => self.env_config.set(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat key-value text: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(&key.trim().replace('-', "_"), value)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        self.apply_text(&text)
    }
}
