use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{parse_f64, parse_usize, wrap_angle, Environment, Phase, StepResult};
use crate::agent::ChannelSignal;
use crate::approximator::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcrobotConfig {
    pub link_length_1: f64,
    /// Only used for the tip height.
    pub link_length_2: f64,
    pub link_mass_1: f64,
    pub link_mass_2: f64,
    pub link_com_1: f64,
    pub link_com_2: f64,
    pub link_moi: f64,
    pub gravity: f64,
    pub max_vel_1: f64,
    pub max_vel_2: f64,
    /// The three actions apply `-torque_mag`, `0`, `+torque_mag` at the elbow.
    pub torque_mag: f64,
    pub dt: f64,
    pub reset_range: f64,
    pub horizon: usize,
    /// Tip height above the pivot that counts as a success.
    pub height_threshold: f64,
    pub success_reward: f64,
    pub torque_cost: f64,
    pub step_cost: f64,
}

impl Default for AcrobotConfig {
    fn default() -> Self {
        Self {
            link_length_1: 1.0,
            link_length_2: 1.0,
            link_mass_1: 1.0,
            link_mass_2: 1.0,
            link_com_1: 0.5,
            link_com_2: 0.5,
            link_moi: 1.0,
            gravity: 9.8,
            max_vel_1: 4.0 * PI,
            max_vel_2: 9.0 * PI,
            torque_mag: 1.0,
            dt: 0.2,
            reset_range: 0.1,
            horizon: 200,
            height_threshold: 1.0,
            success_reward: 1.0,
            torque_cost: 0.01,
            step_cost: 0.01,
        }
    }
}

impl AcrobotConfig {
    pub fn set(&mut self, field: &str, value: &str) -> Result<()> {
        let key = format!("acrobot.{field}");
        let slot = match field {
            "link_length_1" => &mut self.link_length_1,
            "link_length_2" => &mut self.link_length_2,
            "link_mass_1" => &mut self.link_mass_1,
            "link_mass_2" => &mut self.link_mass_2,
            "link_com_1" => &mut self.link_com_1,
            "link_com_2" => &mut self.link_com_2,
            "link_moi" => &mut self.link_moi,
            "gravity" => &mut self.gravity,
            "max_vel_1" => &mut self.max_vel_1,
            "max_vel_2" => &mut self.max_vel_2,
            "torque_mag" => &mut self.torque_mag,
            "dt" => &mut self.dt,
            "reset_range" => &mut self.reset_range,
            "height_threshold" => &mut self.height_threshold,
            "success_reward" => &mut self.success_reward,
            "torque_cost" => &mut self.torque_cost,
            "step_cost" => &mut self.step_cost,
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
            ("link_length_1", self.link_length_1),
            ("link_length_2", self.link_length_2),
            ("link_mass_1", self.link_mass_1),
            ("link_mass_2", self.link_mass_2),
            ("link_com_1", self.link_com_1),
            ("link_com_2", self.link_com_2),
            ("link_moi", self.link_moi),
            ("max_vel_1", self.max_vel_1),
            ("max_vel_2", self.max_vel_2),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("acrobot.{name} must be > 0, got {v}")));
            }
        }
        let nonnegative = [
            ("gravity", self.gravity),
            ("torque_mag", self.torque_mag),
            ("reset_range", self.reset_range),
            ("success_reward", self.success_reward),
            ("torque_cost", self.torque_cost),
        ];
        for (name, v) in nonnegative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("acrobot.{name} must be >= 0, got {v}")));
            }
        }
        // Punishment is given on every step, so the base cost must be strictly positive.
        if !(self.step_cost.is_finite() && self.step_cost > 0.0) {
            return Err(Error::Config(format!(
                "acrobot.step_cost must be > 0, got {}",
                self.step_cost
            )));
        }
        if !self.height_threshold.is_finite() {
            return Err(Error::Config("acrobot.height_threshold must be finite".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("acrobot.horizon must be >= 1".into()));
        }
        Ok(())
    }
}

/// Link angles (0 = hanging straight down) and angular velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AcrobotState {
    pub theta1: f64,
    pub theta2: f64,
    pub dtheta1: f64,
    pub dtheta2: f64,
}

impl AcrobotState {
    fn to_array(self) -> [f64; 4] {
        [self.theta1, self.theta2, self.dtheta1, self.dtheta2]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            theta1: a[0],
            theta2: a[1],
            dtheta1: a[2],
            dtheta2: a[3],
        }
    }

    /// Height of the tip above the pivot.
    pub fn tip_height(&self, cfg: &AcrobotConfig) -> f64 {
        -cfg.link_length_1 * self.theta1.cos() - cfg.link_length_2 * (self.theta1 + self.theta2).cos()
    }

    /// Kinetic plus potential energy of the two-link system.
    pub fn energy(&self, cfg: &AcrobotConfig) -> f64 {
        let AcrobotConfig {
            link_length_1: l1,
            link_mass_1: m1,
            link_mass_2: m2,
            link_com_1: lc1,
            link_com_2: lc2,
            link_moi: inertia,
            gravity: g,
            ..
        } = *cfg;
        let c2 = self.theta2.cos();
        let d11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + 2.0 * inertia;
        let d12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + inertia;
        let d22 = m2 * lc2 * lc2 + inertia;
        let (w1, w2) = (self.dtheta1, self.dtheta2);
        let kinetic = 0.5 * (d11 * w1 * w1 + 2.0 * d12 * w1 * w2 + d22 * w2 * w2);
        let potential =
            -(m1 * lc1 + m2 * l1) * g * self.theta1.cos() - m2 * lc2 * g * (self.theta1 + self.theta2).cos();
        kinetic + potential
    }
}

/// Time derivative of `[θ1, θ2, ω1, ω2]` under elbow torque `torque`.
fn derivatives(s: [f64; 4], torque: f64, cfg: &AcrobotConfig) -> [f64; 4] {
    let AcrobotConfig {
        link_length_1: l1,
        link_mass_1: m1,
        link_mass_2: m2,
        link_com_1: lc1,
        link_com_2: lc2,
        link_moi: inertia,
        gravity: g,
        ..
    } = *cfg;
    let [theta1, theta2, dtheta1, dtheta2] = s;
    let (sin2, cos2) = theta2.sin_cos();

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * cos2) + 2.0 * inertia;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * cos2) + inertia;
    let phi2 = m2 * lc2 * g * (theta1 + theta2).sin();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * sin2 - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * sin2
        + (m1 * lc1 + m2 * l1) * g * theta1.sin()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * sin2 - phi2)
        / (m2 * lc2 * lc2 + inertia - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

/// One classical fourth-order Runge-Kutta step, without wrapping or clamping.
pub fn rk4_step(state: &AcrobotState, torque: f64, dt: f64, cfg: &AcrobotConfig) -> AcrobotState {
    let y = state.to_array();
    let add = |a: [f64; 4], k: [f64; 4], h: f64| -> [f64; 4] {
        [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]]
    };
    let k1 = derivatives(y, torque, cfg);
    let k2 = derivatives(add(y, k1, dt / 2.0), torque, cfg);
    let k3 = derivatives(add(y, k2, dt / 2.0), torque, cfg);
    let k4 = derivatives(add(y, k3, dt), torque, cfg);
    let mut out = y;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    AcrobotState::from_array(out)
}

/// Advances one control step: RK4, then wrap angles and clamp velocities.
pub fn integrate(state: &AcrobotState, torque: f64, dt: f64, cfg: &AcrobotConfig) -> Result<AcrobotState> {
    let raw = rk4_step(state, torque, dt, cfg);
    if !raw.to_array().iter().all(|v| v.is_finite()) {
        return Err(Error::Dynamics(format!("acrobot state diverged: {raw:?}")));
    }
    Ok(AcrobotState {
        theta1: wrap_angle(raw.theta1),
        theta2: wrap_angle(raw.theta2),
        dtheta1: raw.dtheta1.clamp(-cfg.max_vel_1, cfg.max_vel_1),
        dtheta2: raw.dtheta2.clamp(-cfg.max_vel_2, cfg.max_vel_2),
    })
}

pub fn channels(state: &AcrobotState, torque: f64, cfg: &AcrobotConfig) -> ChannelSignal {
    let achieved = state.tip_height(cfg) > cfg.height_threshold;
    ChannelSignal {
        reward: if achieved { cfg.success_reward } else { 0.0 },
        punish: cfg.torque_cost * torque.abs() + cfg.step_cost,
    }
}

#[derive(Debug, Clone)]
pub struct Acrobot {
    cfg: AcrobotConfig,
    state: AcrobotState,
    phase: Phase,
}

impl Acrobot {
    pub fn new(cfg: AcrobotConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: AcrobotState::default(),
            phase: Phase::NeedsReset,
        })
    }

    pub fn config(&self) -> &AcrobotConfig {
        &self.cfg
    }

    pub fn state(&self) -> AcrobotState {
        self.state
    }

    pub fn set_state(&mut self, state: AcrobotState) {
        self.state = state;
        self.phase = Phase::Running { steps: 0 };
    }

    pub fn torque(&self, action: usize) -> Result<f64> {
        match action {
            0 => Ok(-self.cfg.torque_mag),
            1 => Ok(0.0),
            2 => Ok(self.cfg.torque_mag),
            _ => Err(Error::InvalidInput(format!("acrobot action {action} is not 0, 1 or 2"))),
        }
    }

    pub fn observe(&self) -> FeatureVector {
        let s = &self.state;
        FeatureVector::new(vec![
            s.theta1.cos(),
            s.theta1.sin(),
            s.theta2.cos(),
            s.theta2.sin(),
            s.dtheta1 / self.cfg.max_vel_1,
            s.dtheta2 / self.cfg.max_vel_2,
        ])
        .expect("state is kept finite")
    }
}

impl Environment for Acrobot {
    fn observation_len(&self) -> usize {
        6
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn reset(&mut self, seed: u64) -> FeatureVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.cfg.reset_range;
        let mut draw = || if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
        self.state = AcrobotState {
            theta1: draw(),
            theta2: draw(),
            dtheta1: draw(),
            dtheta2: draw(),
        };
        self.phase = Phase::Running { steps: 0 };
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        let torque = self.torque(action)?;
        let steps = self.phase.begin_step()?;
        let next = match integrate(&self.state, torque, self.cfg.dt, &self.cfg) {
            Ok(next) => next,
            Err(e) => {
                self.phase = Phase::NeedsReset;
                return Err(e);
            }
        };
        self.state = next;
        let signal = channels(&self.state, torque, &self.cfg);
        // Success is rewarded repeatedly; only the time limit ends an episode.
        let truncated = steps >= self.cfg.horizon;
        self.phase = if truncated {
            Phase::NeedsReset
        } else {
            Phase::Running { steps }
        };
        Ok(StepResult {
            observation: self.observe(),
            signal,
            terminal: false,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};

    #[test]
    fn reset_is_seeded() {
        let mut env = Acrobot::new(AcrobotConfig::default()).unwrap();
        let a = env.reset(9);
        let s = env.state();
        assert_eq!(a, env.reset(9));
        assert_ne!(a, env.reset(10));
        assert_eq!(a.len(), 6);
        for v in s.to_array() {
            assert!(v.abs() <= 0.1);
        }
    }

    #[test]
    fn hanging_at_rest_is_an_equilibrium() {
        let cfg = AcrobotConfig::default();
        let s = integrate(&AcrobotState::default(), 0.0, cfg.dt, &cfg).unwrap();
        assert_eq!(s, AcrobotState::default());
    }

    #[test]
    fn hanging_channels() {
        let cfg = AcrobotConfig::default();
        let s = AcrobotState::default();
        assert_eq!(s.tip_height(&cfg), -2.0);
        for (torque, punish) in [(-1.0, 0.02), (0.0, 0.01), (1.0, 0.02)] {
            let c = channels(&s, torque, &cfg);
            assert_eq!(c.reward, 0.0);
            assert!((c.punish - punish).abs() < 1e-15);
        }
        let up = AcrobotState {
            theta1: PI,
            ..Default::default()
        };
        assert_eq!(channels(&up, 0.0, &cfg).reward, 1.0);
    }

    #[test]
    fn unforced_energy_is_conserved() {
        // Start states from the reset distribution: hanging with small perturbations.
        let cfg = AcrobotConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let r = cfg.reset_range;
            let mut s = AcrobotState {
                theta1: rng.gen_range(-r..=r),
                theta2: rng.gen_range(-r..=r),
                dtheta1: rng.gen_range(-r..=r),
                dtheta2: rng.gen_range(-r..=r),
            };
            let e0 = s.energy(&cfg);
            for _ in 0..50 {
                s = rk4_step(&s, 0.0, cfg.dt, &cfg);
                let drift = (s.energy(&cfg) - e0).abs() / e0.abs();
                assert!(drift < 1e-3, "relative drift {drift} (E0 = {e0})");
            }
        }
    }

    #[test]
    fn energy_error_shrinks_at_fourth_order() {
        // Large swings: shrinking the step 10x must cut the drift by far more than 10x.
        let cfg = AcrobotConfig::default();
        let start = AcrobotState {
            theta1: 2.0,
            theta2: -1.0,
            dtheta1: 0.5,
            dtheta2: -0.5,
        };
        let e0 = start.energy(&cfg);
        let drift = |dt: f64| {
            let mut s = start;
            let mut worst: f64 = 0.0;
            for _ in 0..(2.0 / dt).round() as usize {
                s = rk4_step(&s, 0.0, dt, &cfg);
                worst = worst.max((s.energy(&cfg) - e0).abs());
            }
            worst
        };
        let (coarse, fine) = (drift(0.02), drift(0.002));
        assert!(fine < 1e-6 * e0.abs(), "{fine}");
        assert!(coarse / fine > 1e3, "{coarse} vs {fine}");
    }

    #[test]
    fn episode_runs_to_truncation() {
        let mut env = Acrobot::new(AcrobotConfig::default()).unwrap();
        env.reset(1);
        for i in 1..=200 {
            let out = env.step(i % 3).unwrap();
            assert!(!out.terminal);
            assert_eq!(out.truncated, i == 200);
        }
        assert!(matches!(env.step(0), Err(Error::Protocol(_))));
        env.reset(2);
        assert!(matches!(env.step(3), Err(Error::InvalidInput(_))));
    }

    proptest! {
        #[test]
        fn random_rollouts_keep_channels_valid(seed in any::<u64>(), actions in proptest::collection::vec(0usize..3, 1..200)) {
            let cfg = AcrobotConfig::default();
            let mut env = Acrobot::new(cfg.clone()).unwrap();
            env.reset(seed);
            for a in actions {
                let out = env.step(a).unwrap();
                prop_assert!(out.signal.reward == 0.0 || out.signal.reward == 1.0);
                prop_assert!(out.signal.punish > 0.0);
                let s = env.state();
                prop_assert!(s.theta1 > -PI && s.theta1 <= PI && s.theta2 > -PI && s.theta2 <= PI);
                prop_assert!(s.dtheta1.abs() <= cfg.max_vel_1 && s.dtheta2.abs() <= cfg.max_vel_2);
            }
        }
    }
}
