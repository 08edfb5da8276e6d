//! Seeded batch experiments.
//!
//! A *case* runs `trials` independent agents, each for `episodes` episodes,
//! and reduces them into per-episode curves. The comparison protocol runs
//! three cases with matched seeds: the hyperbolic agent, an exponential
//! baseline with fixed discounts, and an exponential baseline whose
//! discounts are the averages measured in the hyperbolic run.

mod aggregate;
mod checkpoint;
mod compare;
mod config;
mod output;
mod trial;

pub use aggregate::{aggregate, AggregateCurve, CurvePoint, Metrics};
pub use checkpoint::{export_heads, load_checkpoint, save_checkpoint};
pub use compare::{run_comparison, write_comparison, Comparison, ComparisonMeta, CASE_NAMES, EXPONENTIAL2_WINDOW};
pub use config::ExperimentConfig;
pub use output::{
    format_float, parse_episodes_csv, read_episodes_csv, render_curve_csv, render_episodes_csv, write_case,
    write_curve_csv, write_episodes_csv, CaseMeta, FailedTrial, EPISODE_COLUMNS,
};
pub use trial::{
    final_window_gammas, run_case, run_trial, trial_seed, CaseResult, EpisodeRecord, TrialOutcome, TrialRun,
};
