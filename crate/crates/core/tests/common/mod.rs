#![allow(dead_code)]

use hdrl::agent::{Agent, AgentConfig, ChannelSignal, Mode, Transition};
use hdrl::approximator::FeatureVector;
use hdrl::envs::{EnvConfig, EnvKind};
use hdrl::harness::EpisodeRecord;
use hdrl::td::HyperParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub const CHAIN_LEN: usize = 5;

/// Deterministic chain `0 -> 1 -> ... -> 4 -> end`, reward 1 on the last transition.
pub fn chain_transitions() -> Vec<Transition> {
    (0..CHAIN_LEN)
        .map(|s| {
            let last = s + 1 == CHAIN_LEN;
            Transition {
                state: FeatureVector::one_hot(s, CHAIN_LEN),
                action: 0,
                signal: ChannelSignal::new(if last { 1.0 } else { 0.0 }, 0.0).unwrap(),
                next_state: FeatureVector::one_hot((s + 1).min(CHAIN_LEN - 1), CHAIN_LEN),
                terminal: last,
            }
        })
        .collect()
}

/// Linear heads on one-hot features, zero init so no state starts below the rectifier.
pub fn tabular_config(mode: Mode, kappa: f64, compensate: bool) -> AgentConfig {
    AgentConfig {
        mode,
        hyper: HyperParams::new(kappa, 1.0, 0.1).unwrap(),
        gamma_reward: 1.0,
        gamma_punish: 1.0,
        critic_lr: 0.2,
        compensate,
        hidden: 0,
        init_scale: 0.0,
        ..AgentConfig::default()
    }
}

pub fn train_chain(config: AgentConfig, sweeps: usize) -> Agent {
    let mut agent = Agent::new(config, CHAIN_LEN, 1).unwrap();
    let chain = chain_transitions();
    for _ in 0..sweeps {
        for t in &chain {
            agent.learn(t).unwrap();
        }
    }
    agent
}

/// Reward-channel TD errors of one more sweep, taken on a copy of the agent.
pub fn chain_residuals(agent: &Agent) -> Vec<f64> {
    let mut probe = agent.clone();
    chain_transitions()
        .iter()
        .map(|t| probe.learn(t).unwrap().delta_r)
        .collect()
}

pub fn chain_values(agent: &Agent) -> Vec<f64> {
    (0..CHAIN_LEN)
        .map(|s| {
            agent
                .critics()
                .0
                .forward(&FeatureVector::one_hot(s, CHAIN_LEN))
                .unwrap()
                .value
        })
        .collect()
}

/// Undiscounted value iteration on the chain.
pub fn chain_value_iteration() -> Vec<f64> {
    let chain = chain_transitions();
    let mut v = vec![0.0; CHAIN_LEN];
    for _ in 0..10 * CHAIN_LEN {
        for (s, t) in chain.iter().enumerate() {
            let next = if t.terminal { 0.0 } else { v[s + 1] };
            v[s] = t.signal.reward + next;
        }
    }
    v
}

/// 100 CartPole-RP transitions under uniformly random actions, resetting on termination.
pub fn recorded_stream(seed: u64) -> Vec<Transition> {
    let mut env = EnvConfig::default().build(EnvKind::CartPole).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = env.reset(rng.gen());
    let mut out = Vec::with_capacity(100);
    while out.len() < 100 {
        let action = rng.gen_range(0..env.n_actions());
        let step = env.step(action).unwrap();
        let done = step.terminal || step.truncated;
        out.push(Transition {
            state: state.clone(),
            action,
            signal: step.signal,
            next_state: step.observation.clone(),
            terminal: step.terminal,
        });
        state = if done { env.reset(rng.gen()) } else { step.observation };
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// One-sided Welch test of `mean(a) < mean(b)`; returns the p-value.
pub fn welch_p_less(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_var(a) / a.len() as f64, sample_var(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return if ma < mb {
            0.0
        } else if ma > mb {
            1.0
        } else {
            0.5
        };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    StudentsT::new(0.0, 1.0, df).unwrap().cdf(t)
}

/// Per-trial mean of `metric` over the last `fraction` of episodes, in trial order.
pub fn final_window_means(
    records: &[EpisodeRecord],
    fraction: f64,
    metric: impl Fn(&EpisodeRecord) -> f64,
) -> Vec<f64> {
    let episodes = records.iter().map(|r| r.episode + 1).max().unwrap_or(0);
    let start = episodes - ((episodes as f64 * fraction).round() as usize).max(1);
    let mut trials: Vec<usize> = records.iter().map(|r| r.trial).collect();
    trials.sort_unstable();
    trials.dedup();
    trials
        .iter()
        .map(|&t| {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.trial == t && r.episode >= start)
                .map(&metric)
                .collect();
            mean(&xs)
        })
        .collect()
}
