//! Classic-control tasks with split reward/punishment channels.
//!
//! | task        | reward channel                 | punishment channel             |
//! |-------------|--------------------------------|--------------------------------|
//! | CartPole-RP | continuous: `(1 + cos θ) / 2`  | event: 1 on failure (terminal) |
//! | Acrobot-RP  | event: 1 while tip is high     | continuous: torque + step cost |
//!
//! Every physical constant, channel magnitude and threshold lives in the
//! per-task config struct.

pub mod acrobot;
pub mod cartpole;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use acrobot::{Acrobot, AcrobotConfig, AcrobotState};
pub use cartpole::{CartPole, CartPoleConfig, CartPoleState};

use crate::agent::ChannelSignal;
use crate::approximator::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: FeatureVector,
    pub signal: ChannelSignal,
    /// The task ended (failure); the successor value is zero.
    pub terminal: bool,
    /// The time limit cut the episode short; the successor is still bootstrapped.
    pub truncated: bool,
}

pub trait Environment: Send {
    fn observation_len(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn reset(&mut self, seed: u64) -> FeatureVector;
    fn step(&mut self, action: usize) -> Result<StepResult>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    #[serde(rename = "cartpole-rp")]
    CartPole,
    #[serde(rename = "acrobot-rp")]
    Acrobot,
}

impl EnvKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole-rp",
            EnvKind::Acrobot => "acrobot-rp",
        }
    }

    /// Episodes per trial used when none is configured.
    pub fn default_episodes(&self) -> usize {
        match self {
            EnvKind::CartPole => 300,
            EnvKind::Acrobot => 500,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartpole-rp" => Ok(EnvKind::CartPole),
            "acrobot-rp" => Ok(EnvKind::Acrobot),
            other => Err(Error::Config(format!(
                "unknown environment {other:?} (expected cartpole-rp or acrobot-rp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub cartpole: CartPoleConfig,
    pub acrobot: AcrobotConfig,
}

impl EnvConfig {
    /// Sets a `cartpole.*` or `acrobot.*` key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.split_once('.') {
            Some(("cartpole", field)) => self.cartpole.set(field, value),
            Some(("acrobot", field)) => self.acrobot.set(field, value),
            _ => Err(Error::Config(format!("unknown environment key {key:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cartpole.validate()?;
        self.acrobot.validate()
    }

    pub fn build(&self, kind: EnvKind) -> Result<Box<dyn Environment>> {
        Ok(match kind {
            EnvKind::CartPole => Box::new(CartPole::new(self.cartpole.clone())?),
            EnvKind::Acrobot => Box::new(Acrobot::new(self.acrobot.clone())?),
        })
    }
}

pub(crate) fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?} as a number: {e}")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{key}: value must be finite")));
    }
    Ok(v)
}

pub(crate) fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?} as an integer: {e}")))
}

/// Wraps an angle into `(-π, π]`.
pub(crate) fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Tracks reset/termination so stepping a finished episode is refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase {
    NeedsReset,
    Running { steps: usize },
}

impl Phase {
    pub(crate) fn begin_step(&mut self) -> Result<usize> {
        match *self {
            Phase::NeedsReset => Err(Error::Protocol(
                "step called before reset or after the episode ended".into(),
            )),
            Phase::Running { steps } => Ok(steps + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        for x in [-10.0, -PI, -3.0, 0.0, 3.0, PI, 7.0, 100.0] {
            let y = wrap_angle(x);
            assert!(y > -PI && y <= PI, "{x} -> {y}");
            assert!((x.sin() - y.sin()).abs() < 1e-9 && (x.cos() - y.cos()).abs() < 1e-9);
        }
        assert_eq!(wrap_angle(0.5), 0.5);
    }

    #[test]
    fn env_kind_parsing() {
        assert_eq!("cartpole-rp".parse::<EnvKind>().unwrap(), EnvKind::CartPole);
        assert_eq!("acrobot-rp".parse::<EnvKind>().unwrap(), EnvKind::Acrobot);
        assert!("pendulum".parse::<EnvKind>().is_err());
        assert_eq!(EnvKind::Acrobot.to_string(), "acrobot-rp");
    }

    #[test]
    fn config_keys() {
        let mut cfg = EnvConfig::default();
        cfg.set("cartpole.force_mag", "12.5").unwrap();
        cfg.set("acrobot.torque_cost", "0.02").unwrap();
        assert_eq!(cfg.cartpole.force_mag, 12.5);
        assert_eq!(cfg.acrobot.torque_cost, 0.02);
        assert!(cfg.set("cartpole.nope", "1").is_err());
        assert!(cfg.set("pendulum.mass", "1").is_err());
        assert!(cfg.set("cartpole.dt", "abc").is_err());
    }
}
