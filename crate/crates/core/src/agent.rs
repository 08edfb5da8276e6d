//! Reward-punishment actor-critic.
//!
//! Every agent keeps two rectified critics, one for the reward channel and
//! one for the punishment channel, plus a softmax policy driven by the
//! advantage `δ_r - δ_q`. The mode decides how each channel's TD error is
//! formed:
//!
//! - [`Mode::Hyperbolic`]: state-dependent discount from [`td::effective_discount`],
//!   signal compensated by `(1 - γ̄)`, statistics updated online.
//! - [`Mode::Exponential`]: fixed per-channel discounts, raw signals.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::{Critic, FeatureVector, Head, HeadShape, Policy};
use crate::error::{ensure_finite, Error, Result};
use crate::td::{self, HyperParams, RunningStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hyperbolic,
    Exponential,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyperbolic" => Ok(Mode::Hyperbolic),
            "exponential" => Ok(Mode::Exponential),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Hyperbolic => "hyperbolic",
            Mode::Exponential => "exponential",
        })
    }
}

/// One step's split signal. Both channels are non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelSignal {
    pub reward: f64,
    pub punish: f64,
}

impl ChannelSignal {
    pub fn new(reward: f64, punish: f64) -> Result<Self> {
        let signal = Self { reward, punish };
        signal.validate()?;
        Ok(signal)
    }

    /// Splits a signed scalar into its positive part and negated negative part.
    pub fn split(value: f64) -> Result<Self> {
        ensure_finite("signal", value)?;
        Ok(Self {
            reward: value.max(0.0),
            punish: (-value).max(0.0),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("reward", self.reward), ("punish", self.punish)] {
            ensure_finite(name, v)?;
            if v < 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: FeatureVector,
    pub action: usize,
    pub signal: ChannelSignal,
    pub next_state: FeatureVector,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub mode: Mode,
    /// Read in hyperbolic mode only.
    pub hyper: HyperParams,
    /// Fixed discounts, read in exponential mode only.
    pub gamma_reward: f64,
    pub gamma_punish: f64,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub ema_rate: f64,
    /// Multiply signals by `(1 - γ̄)` in hyperbolic mode.
    pub compensate: bool,
    /// Hidden tanh units per head; 0 gives linear heads.
    pub hidden: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hyperbolic,
            hyper: HyperParams::default(),
            gamma_reward: 0.99,
            gamma_punish: 0.99,
            critic_lr: 3e-2,
            actor_lr: 1e-2,
            ema_rate: td::DEFAULT_EMA_RATE,
            compensate: true,
            hidden: 32,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Hyperbolic => self.hyper.validate()?,
            Mode::Exponential => {
                for (name, g) in [("gamma_r", self.gamma_reward), ("gamma_q", self.gamma_punish)] {
                    if !(0.0..=1.0).contains(&g) {
                        return Err(Error::Config(format!("{name} must lie in [0, 1], got {g}")));
                    }
                }
            }
        }
        for (name, lr) in [("critic_lr", self.critic_lr), ("actor_lr", self.actor_lr)] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {lr}")));
            }
        }
        if !(self.ema_rate > 0.0 && self.ema_rate <= 1.0) {
            return Err(Error::Config(format!(
                "ema_rate must lie in (0, 1], got {}",
                self.ema_rate
            )));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Config(format!(
                "init_scale must be >= 0, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub delta_r: f64,
    pub delta_q: f64,
    pub gamma_r: f64,
    pub gamma_q: f64,
    pub v_r: f64,
    pub v_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    config: AgentConfig,
    critic_r: Critic,
    critic_q: Critic,
    policy: Policy,
    stats_r: RunningStats,
    stats_q: RunningStats,
    rng: ChaCha8Rng,
    steps: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, n_features: usize, n_actions: usize) -> Result<Self> {
        config.validate()?;
        if n_features == 0 || n_actions == 0 {
            return Err(Error::Config(format!(
                "agent needs at least one feature and one action, got {n_features}/{n_actions}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let value_shape = HeadShape {
            inputs: n_features,
            hidden: config.hidden,
            outputs: 1,
        };
        let policy_shape = HeadShape {
            outputs: n_actions,
            ..value_shape
        };
        let critic_r = Critic::new(Head::random(value_shape, config.init_scale, &mut rng));
        let critic_q = Critic::new(Head::random(value_shape, config.init_scale, &mut rng));
        let policy = Policy::new(Head::random(policy_shape, config.init_scale, &mut rng));
        Ok(Self {
            stats_r: RunningStats::new(config.ema_rate),
            stats_q: RunningStats::new(config.ema_rate),
            config,
            critic_r,
            critic_q,
            policy,
            rng,
            steps: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn n_actions(&self) -> usize {
        self.policy.n_actions()
    }

    pub fn critics(&self) -> (&Critic, &Critic) {
        (&self.critic_r, &self.critic_q)
    }

    pub fn critics_mut(&mut self) -> (&mut Critic, &mut Critic) {
        (&mut self.critic_r, &mut self.critic_q)
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut Policy {
        &mut self.policy
    }

    pub fn stats(&self) -> (&RunningStats, &RunningStats) {
        (&self.stats_r, &self.stats_q)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Samples an action from the current policy.
    pub fn act(&mut self, state: &FeatureVector) -> Result<usize> {
        let probs = self.policy.probabilities(state)?;
        let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidInput(format!("policy distribution: {e}")))?;
        Ok(dist.sample(&mut self.rng))
    }

    /// `V_r(s) - V_q(s)`, for reporting only.
    pub fn combined_value(&self, state: &FeatureVector) -> Result<f64> {
        Ok(self.critic_r.forward(state)?.value - self.critic_q.forward(state)?.value)
    }

    /// Current per-channel γ̄ (hyperbolic) or the fixed discounts (exponential).
    pub fn snapshot_discount_averages(&self) -> Result<(f64, f64)> {
        if self.steps == 0 {
            return Err(Error::NotReady("no transition has been learned yet".into()));
        }
        Ok(match self.config.mode {
            Mode::Hyperbolic => (self.stats_r.avg_discount, self.stats_q.avg_discount),
            Mode::Exponential => (self.config.gamma_reward, self.config.gamma_punish),
        })
    }

    /// One online actor-critic step. On any error the agent is left untouched.
    pub fn learn(&mut self, t: &Transition) -> Result<StepDiagnostics> {
        t.signal.validate()?;
        if t.state.len() != t.next_state.len() {
            return Err(Error::Config(format!(
                "state has {} features but next state has {}",
                t.state.len(),
                t.next_state.len()
            )));
        }
        if t.action >= self.n_actions() {
            return Err(Error::InvalidInput(format!(
                "action {} out of range for {} actions",
                t.action,
                self.n_actions()
            )));
        }

        let v_r = self.critic_r.forward(&t.state)?.value;
        let v_q = self.critic_q.forward(&t.state)?.value;
        let next_r = self.critic_r.forward(&t.next_state)?.value;
        let next_q = self.critic_q.forward(&t.next_state)?.value;

        let (out_r, out_q) = match self.config.mode {
            Mode::Hyperbolic => {
                let hp = &self.config.hyper;
                let c = self.config.compensate;
                (
                    td::channel_td(t.signal.reward, v_r, next_r, t.terminal, &self.stats_r, hp, c)?,
                    td::channel_td(t.signal.punish, v_q, next_q, t.terminal, &self.stats_q, hp, c)?,
                )
            }
            Mode::Exponential => {
                let fixed = |signal: f64, gamma: f64, v: f64, next: f64| -> Result<td::TdOutcome> {
                    Ok(td::TdOutcome {
                        delta: td::hyper_td_error(signal, gamma, v, next, t.terminal)?,
                        gamma_eff: gamma,
                        scaled_signal: signal,
                    })
                };
                (
                    fixed(t.signal.reward, self.config.gamma_reward, v_r, next_r)?,
                    fixed(t.signal.punish, self.config.gamma_punish, v_q, next_q)?,
                )
            }
        };
        let advantage = ensure_finite("advantage", out_r.delta - out_q.delta)?;

        // Everything that can fail is evaluated before the first mutation.
        let grad_r = self.critic_r.value_gradient(&t.state)?;
        let grad_q = self.critic_q.value_gradient(&t.state)?;
        let grad_pi = self.policy.log_prob_gradient(&t.state, t.action)?;
        let (stats_r, stats_q) = match self.config.mode {
            Mode::Hyperbolic => (
                td::update_avg_discount(&td::update_stats(&self.stats_r, t.signal.reward)?, out_r.gamma_eff)?,
                td::update_avg_discount(&td::update_stats(&self.stats_q, t.signal.punish)?, out_q.gamma_eff)?,
            ),
            Mode::Exponential => (self.stats_r, self.stats_q),
        };
        let steps = [
            (&grad_r, self.config.critic_lr * out_r.delta),
            (&grad_q, self.config.critic_lr * out_q.delta),
            (&grad_pi, self.config.actor_lr * advantage),
        ];
        for (grad, scale) in steps {
            if grad.iter().any(|g| !(g * scale).is_finite()) {
                return Err(Error::InvalidInput("non-finite parameter step".into()));
            }
        }

        self.critic_r
            .head
            .add_scaled(&grad_r, self.config.critic_lr * out_r.delta);
        self.critic_q
            .head
            .add_scaled(&grad_q, self.config.critic_lr * out_q.delta);
        self.policy.head.add_scaled(&grad_pi, self.config.actor_lr * advantage);
        self.stats_r = stats_r;
        self.stats_q = stats_q;
        self.steps += 1;

        Ok(StepDiagnostics {
            delta_r: out_r.delta,
            delta_q: out_q.delta,
            gamma_r: out_r.gamma_eff,
            gamma_q: out_q.gamma_eff,
            v_r,
            v_q,
        })
    }
}
