use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::write_case;
use super::trial::{final_window_gammas, run_case, CaseResult};
use crate::agent::Mode;
use crate::error::{Error, Result};

/// Fraction of final episodes whose discount averages configure exponential2.
pub const EXPONENTIAL2_WINDOW: f64 = 0.25;

pub const CASE_NAMES: [&str; 3] = ["hyperbolic", "exponential1", "exponential2"];

/// Contents of `compare.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMeta {
    pub env: String,
    pub base_seed: u64,
    pub trial_seeds: Vec<u64>,
    pub cases: Vec<String>,
    /// Discount averages measured on the hyperbolic phase.
    pub measured_gamma_r: f64,
    pub measured_gamma_q: f64,
    pub exponential1_gamma_r: f64,
    pub exponential1_gamma_q: f64,
    pub exponential2_gamma_r: f64,
    pub exponential2_gamma_q: f64,
    pub window_fraction: f64,
}

#[derive(Debug)]
pub struct Comparison {
    pub hyperbolic: CaseResult,
    pub exponential1: CaseResult,
    pub exponential2: CaseResult,
    pub meta: ComparisonMeta,
}

impl Comparison {
    pub fn cases(&self) -> [&CaseResult; 3] {
        [&self.hyperbolic, &self.exponential1, &self.exponential2]
    }
}

/// Runs the hyperbolic case, measures its late-training discount averages,
/// then runs both exponential baselines on the same trial seeds.
pub fn run_comparison(config: &ExperimentConfig) -> Result<Comparison> {
    let mut hyper_cfg = config.clone();
    hyper_cfg.agent.mode = Mode::Hyperbolic;
    let hyperbolic = run_case(CASE_NAMES[0], &hyper_cfg)?;
    let (measured_r, measured_q) = final_window_gammas(&hyperbolic, EXPONENTIAL2_WINDOW).ok_or_else(|| {
        let reasons: Vec<String> = hyperbolic
            .failures()
            .into_iter()
            .map(|(t, e)| format!("trial {t}: {e}"))
            .collect();
        Error::Config(format!("every hyperbolic trial failed: {}", reasons.join("; ")))
    })?;

    let mut exp1_cfg = config.clone();
    exp1_cfg.agent.mode = Mode::Exponential;
    let exponential1 = run_case(CASE_NAMES[1], &exp1_cfg)?;

    let mut exp2_cfg = exp1_cfg.clone();
    exp2_cfg.agent.gamma_reward = measured_r;
    exp2_cfg.agent.gamma_punish = measured_q;
    let exponential2 = run_case(CASE_NAMES[2], &exp2_cfg)?;

    let meta = ComparisonMeta {
        env: config.env.to_string(),
        base_seed: config.seed,
        trial_seeds: hyperbolic.trial_seeds(),
        cases: CASE_NAMES.iter().map(|s| s.to_string()).collect(),
        measured_gamma_r: measured_r,
        measured_gamma_q: measured_q,
        exponential1_gamma_r: exp1_cfg.agent.gamma_reward,
        exponential1_gamma_q: exp1_cfg.agent.gamma_punish,
        exponential2_gamma_r: exp2_cfg.agent.gamma_reward,
        exponential2_gamma_q: exp2_cfg.agent.gamma_punish,
        window_fraction: EXPONENTIAL2_WINDOW,
    };
    Ok(Comparison {
        hyperbolic,
        exponential1,
        exponential2,
        meta,
    })
}

/// Writes one sub-directory per case plus `compare.json` under `dir`.
pub fn write_comparison(comparison: &Comparison, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for case in comparison.cases() {
        write_case(case, &dir.join(&case.name))?;
    }
    let meta = serde_json::to_string_pretty(&comparison.meta)?;
    fs::write(dir.join("compare.json"), meta + "\n")?;
    Ok(())
}
