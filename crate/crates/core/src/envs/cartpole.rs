use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{parse_f64, parse_usize, wrap_angle, Environment, Phase, StepResult};
use crate::agent::ChannelSignal;
use crate::approximator::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartPoleConfig {
    pub gravity: f64,
    pub mass_cart: f64,
    pub mass_pole: f64,
    /// Half the pole length (distance from pivot to centre of mass).
    pub half_length: f64,
    /// Magnitude of the push; the two actions apply `-force_mag` and `+force_mag`.
    pub force_mag: f64,
    pub dt: f64,
    pub x_threshold: f64,
    pub angle_threshold: f64,
    pub reset_range: f64,
    pub horizon: usize,
    /// Peak of the per-step reward `reward_scale * (1 + cos θ) / 2`.
    pub reward_scale: f64,
    /// Punishment granted on the failing step.
    pub failure_punish: f64,
    /// Observation divisors for velocity and angular velocity.
    pub velocity_scale: f64,
    pub angular_velocity_scale: f64,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            mass_cart: 1.0,
            mass_pole: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            dt: 0.02,
            x_threshold: 2.4,
            angle_threshold: 0.21,
            reset_range: 0.05,
            horizon: 500,
            reward_scale: 1.0,
            failure_punish: 1.0,
            velocity_scale: 2.0,
            angular_velocity_scale: 3.0,
        }
    }
}

impl CartPoleConfig {
    pub fn set(&mut self, field: &str, value: &str) -> Result<()> {
        let key = format!("cartpole.{field}");
        let slot = match field {
            "gravity" => &mut self.gravity,
            "mass_cart" => &mut self.mass_cart,
            "mass_pole" => &mut self.mass_pole,
            "half_length" => &mut self.half_length,
            "force_mag" => &mut self.force_mag,
            "dt" => &mut self.dt,
            "x_threshold" => &mut self.x_threshold,
            "angle_threshold" => &mut self.angle_threshold,
            "reset_range" => &mut self.reset_range,
            "reward_scale" => &mut self.reward_scale,
            "failure_punish" => &mut self.failure_punish,
            "velocity_scale" => &mut self.velocity_scale,
            "angular_velocity_scale" => &mut self.angular_velocity_scale,
            "horizon" => {
                self.horizon = parse_usize(&key, value)?;
                return Ok(());
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        };
        *slot = parse_f64(&key, value)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gravity", self.gravity),
            ("mass_cart", self.mass_cart),
            ("mass_pole", self.mass_pole),
            ("half_length", self.half_length),
            ("dt", self.dt),
            ("x_threshold", self.x_threshold),
            ("angle_threshold", self.angle_threshold),
            ("velocity_scale", self.velocity_scale),
            ("angular_velocity_scale", self.angular_velocity_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("cartpole.{name} must be > 0, got {v}")));
            }
        }
        let nonnegative = [
            ("force_mag", self.force_mag),
            ("reset_range", self.reset_range),
            ("reward_scale", self.reward_scale),
            ("failure_punish", self.failure_punish),
        ];
        for (name, v) in nonnegative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("cartpole.{name} must be >= 0, got {v}")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::Config("cartpole.horizon must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartPoleState {
    pub cart_position: f64,
    pub cart_velocity: f64,
    /// Radians, 0 is upright.
    pub pole_angle: f64,
    pub pole_angular_velocity: f64,
}

impl CartPoleState {
    fn is_finite(&self) -> bool {
        [
            self.cart_position,
            self.cart_velocity,
            self.pole_angle,
            self.pole_angular_velocity,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// One explicit Euler step of the cart-pole equations of motion under `force`.
pub fn integrate(state: &CartPoleState, force: f64, cfg: &CartPoleConfig) -> Result<CartPoleState> {
    let total_mass = cfg.mass_cart + cfg.mass_pole;
    let polemass_length = cfg.mass_pole * cfg.half_length;
    let (sin, cos) = state.pole_angle.sin_cos();
    let omega = state.pole_angular_velocity;

    let temp = (force + polemass_length * omega * omega * sin) / total_mass;
    let angular_acc =
        (cfg.gravity * sin - cos * temp) / (cfg.half_length * (4.0 / 3.0 - cfg.mass_pole * cos * cos / total_mass));
    let acc = temp - polemass_length * angular_acc * cos / total_mass;

    let next = CartPoleState {
        cart_position: state.cart_position + cfg.dt * state.cart_velocity,
        cart_velocity: state.cart_velocity + cfg.dt * acc,
        pole_angle: wrap_angle(state.pole_angle + cfg.dt * omega),
        pole_angular_velocity: omega + cfg.dt * angular_acc,
    };
    if !next.is_finite() {
        return Err(Error::Dynamics(format!("cart-pole state diverged: {next:?}")));
    }
    Ok(next)
}

/// Channel values for a post-step state, plus whether the state is a failure.
pub fn channels(state: &CartPoleState, cfg: &CartPoleConfig) -> (ChannelSignal, bool) {
    let failed = state.cart_position.abs() > cfg.x_threshold || state.pole_angle.abs() > cfg.angle_threshold;
    let signal = ChannelSignal {
        reward: cfg.reward_scale * (1.0 + state.pole_angle.cos()) / 2.0,
        punish: if failed { cfg.failure_punish } else { 0.0 },
    };
    (signal, failed)
}

#[derive(Debug, Clone)]
pub struct CartPole {
    cfg: CartPoleConfig,
    state: CartPoleState,
    phase: Phase,
}

impl CartPole {
    pub fn new(cfg: CartPoleConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: CartPoleState::default(),
            phase: Phase::NeedsReset,
        })
    }

    pub fn config(&self) -> &CartPoleConfig {
        &self.cfg
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    /// Overrides the current state and starts a fresh episode from it.
    pub fn set_state(&mut self, state: CartPoleState) {
        self.state = state;
        self.phase = Phase::Running { steps: 0 };
    }

    pub fn observe(&self) -> FeatureVector {
        let s = &self.state;
        FeatureVector::new(vec![
            s.cart_position / self.cfg.x_threshold,
            s.cart_velocity / self.cfg.velocity_scale,
            s.pole_angle / self.cfg.angle_threshold,
            s.pole_angular_velocity / self.cfg.angular_velocity_scale,
        ])
        .expect("state is kept finite")
    }
}

impl Environment for CartPole {
    fn observation_len(&self) -> usize {
        4
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn reset(&mut self, seed: u64) -> FeatureVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.cfg.reset_range;
        let mut draw = || if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
        self.state = CartPoleState {
            cart_position: draw(),
            cart_velocity: draw(),
            pole_angle: draw(),
            pole_angular_velocity: draw(),
        };
        self.phase = Phase::Running { steps: 0 };
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        let force = match action {
            0 => -self.cfg.force_mag,
            1 => self.cfg.force_mag,
            _ => return Err(Error::InvalidInput(format!("cart-pole action {action} is not 0 or 1"))),
        };
        let steps = self.phase.begin_step()?;
        let next = match integrate(&self.state, force, &self.cfg) {
            Ok(next) => next,
            Err(e) => {
                self.phase = Phase::NeedsReset;
                return Err(e);
            }
        };
        self.state = next;
        let (signal, terminal) = channels(&self.state, &self.cfg);
        let truncated = !terminal && steps >= self.cfg.horizon;
        self.phase = if terminal || truncated {
            Phase::NeedsReset
        } else {
            Phase::Running { steps }
        };
        Ok(StepResult {
            observation: self.observe(),
            signal,
            terminal,
            truncated,
        })
    }
}
