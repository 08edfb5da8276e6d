use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, AggregateCurve};
use super::config::ExperimentConfig;
use crate::agent::{Agent, Transition};
use crate::error::{Error, Result};

/// Mixed into the trial seed for the stream of per-episode environment seeds.
const ENV_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub trial: usize,
    pub episode: usize,
    pub reward_sum: f64,
    pub punish_sum: f64,
    /// `reward_sum - punish_sum`.
    pub ret: f64,
    pub mean_gamma_r: f64,
    pub mean_gamma_q: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub records: Vec<EpisodeRecord>,
    /// Learning steps skipped after a numerical failure.
    pub rejected_steps: u64,
    pub agent: Agent,
}

#[derive(Debug)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub result: Result<TrialRun>,
}

pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed.wrapping_add(trial as u64)
}

/// Trains one fresh agent for the configured number of episodes.
pub fn run_trial(config: &ExperimentConfig, trial: usize, seed: u64) -> Result<TrialRun> {
    let mut env = config.env_config.build(config.env)?;
    let mut agent_config = config.agent.clone();
    agent_config.seed = seed;
    let mut agent = Agent::new(agent_config, env.observation_len(), env.n_actions())?;
    let mut episode_seeds = ChaCha8Rng::seed_from_u64(seed ^ ENV_SEED_SALT);

    let mut records = Vec::with_capacity(config.episodes());
    let mut rejected_steps = 0;
    for episode in 0..config.episodes() {
        let mut state = env.reset(episode_seeds.next_u64());
        let mut reward_sum = 0.0;
        let mut punish_sum = 0.0;
        let (mut gamma_r_sum, mut gamma_q_sum, mut learned) = (0.0, 0.0, 0usize);
        let mut steps = 0;
        loop {
            let action = agent.act(&state)?;
            let step = env.step(action)?;
            steps += 1;
            reward_sum += step.signal.reward;
            punish_sum += step.signal.punish;

            let transition = Transition {
                state,
                action,
                signal: step.signal,
                next_state: step.observation,
                terminal: step.terminal,
            };
            match agent.learn(&transition) {
                Ok(d) => {
                    gamma_r_sum += d.gamma_r;
                    gamma_q_sum += d.gamma_q;
                    learned += 1;
                }
                Err(e) => {
                    rejected_steps += 1;
                    log::warn!("trial {trial} episode {episode} step {steps}: learning step rejected: {e}");
                }
            }
            state = transition.next_state;
            if step.terminal || step.truncated {
                break;
            }
        }
        let mean = |sum: f64| if learned > 0 { sum / learned as f64 } else { 0.0 };
        records.push(EpisodeRecord {
            trial,
            episode,
            reward_sum,
            punish_sum,
            ret: reward_sum - punish_sum,
            mean_gamma_r: mean(gamma_r_sum),
            mean_gamma_q: mean(gamma_q_sum),
            steps,
        });
    }
    Ok(TrialRun {
        records,
        rejected_steps,
        agent,
    })
}

#[derive(Debug)]
pub struct CaseResult {
    pub name: String,
    pub config: ExperimentConfig,
    pub outcomes: Vec<TrialOutcome>,
    /// Reduction over the successful trials.
    pub curve: AggregateCurve,
}

impl CaseResult {
    pub fn trial_seeds(&self) -> Vec<u64> {
        self.outcomes.iter().map(|o| o.seed).collect()
    }

    pub fn successful(&self) -> impl Iterator<Item = &TrialRun> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok())
    }

    pub fn failures(&self) -> Vec<(usize, String)> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(|e| (o.trial, e.to_string())))
            .collect()
    }

    /// All successful records, ordered by trial then episode.
    pub fn records(&self) -> Vec<EpisodeRecord> {
        self.successful().flat_map(|t| t.records.iter().cloned()).collect()
    }

    pub fn rejected_steps(&self) -> u64 {
        self.successful().map(|t| t.rejected_steps).sum()
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every trial of one case on a worker pool; results are ordered by trial index.
pub fn run_case(name: &str, config: &ExperimentConfig) -> Result<CaseResult> {
    config.validate()?;
    let pool = thread_pool(config.jobs)?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = trial_seed(config.seed, trial);
                let result = run_trial(config, trial, seed);
                if let Err(e) = &result {
                    log::warn!("{name}: trial {trial} failed: {e}");
                }
                TrialOutcome { trial, seed, result }
            })
            .collect()
    });
    let per_trial: Vec<&[EpisodeRecord]> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(|t| t.records.as_slice()))
        .collect();
    let curve = aggregate(&per_trial, config.episodes());
    Ok(CaseResult {
        name: name.to_string(),
        config: config.clone(),
        outcomes,
        curve,
    })
}

/// Per-channel mean of the episode discount averages over the last
/// `fraction` of episodes, averaged across successful trials.
pub fn final_window_gammas(case: &CaseResult, fraction: f64) -> Option<(f64, f64)> {
    let episodes = case.config.episodes();
    let window = ((episodes as f64 * fraction).ceil() as usize).clamp(1, episodes);
    let start = episodes - window;
    let per_trial: Vec<(f64, f64)> = case
        .successful()
        .map(|t| {
            let tail = &t.records[start..];
            let n = tail.len() as f64;
            (
                tail.iter().map(|r| r.mean_gamma_r).sum::<f64>() / n,
                tail.iter().map(|r| r.mean_gamma_q).sum::<f64>() / n,
            )
        })
        .collect();
    if per_trial.is_empty() {
        return None;
    }
    let n = per_trial.len() as f64;
    Some((
        per_trial.iter().map(|p| p.0).sum::<f64>() / n,
        per_trial.iter().map(|p| p.1).sum::<f64>() / n,
    ))
}
