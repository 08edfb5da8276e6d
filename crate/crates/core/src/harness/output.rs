//! CSV and metadata files.
//!
//! `episodes.csv` columns:
//! `trial,episode,reward_sum,punish_sum,return,mean_gamma_r,mean_gamma_q,steps`
//!
//! `curve.csv` columns: `episode`, then `<metric>_mean,<metric>_std` for each
//! of `reward_sum, punish_sum, return, mean_gamma_r, mean_gamma_q, steps`.
//!
//! Floats are written with 9 significant digits, so identical inputs always
//! produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::{AggregateCurve, Metrics};
use super::config::ExperimentConfig;
use super::trial::{final_window_gammas, CaseResult, EpisodeRecord};
use crate::error::{Error, Result};

pub const EPISODE_COLUMNS: [&str; 8] = [
    "trial",
    "episode",
    "reward_sum",
    "punish_sum",
    "return",
    "mean_gamma_r",
    "mean_gamma_q",
    "steps",
];

const SIGNIFICANT_DIGITS: usize = 9;

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros trimmed,
/// scientific notation only for very large or small magnitudes.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn render_episodes_csv(records: &[EpisodeRecord]) -> String {
    let mut out = EPISODE_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.trial,
            r.episode,
            format_float(r.reward_sum),
            format_float(r.punish_sum),
            format_float(r.ret),
            format_float(r.mean_gamma_r),
            format_float(r.mean_gamma_q),
            r.steps
        );
    }
    out
}

pub fn render_curve_csv(curve: &AggregateCurve) -> String {
    let mut out = String::from("episode");
    for name in Metrics::NAMES {
        let _ = write!(out, ",{name}_mean,{name}_std");
    }
    out.push('\n');
    for p in &curve.points {
        out.push_str(&p.episode.to_string());
        for (m, s) in p.mean.to_array().iter().zip(p.std.to_array()) {
            let _ = write!(out, ",{},{}", format_float(*m), format_float(s));
        }
        out.push('\n');
    }
    out
}

pub fn write_episodes_csv(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    fs::write(path, render_episodes_csv(records))?;
    Ok(())
}

pub fn write_curve_csv(curve: &AggregateCurve, path: &Path) -> Result<()> {
    fs::write(path, render_curve_csv(curve))?;
    Ok(())
}

pub fn parse_episodes_csv(text: &str) -> Result<Vec<EpisodeRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty episodes file".into()))?;
    if header != EPISODE_COLUMNS.join(",") {
        return Err(Error::Parse(format!("unexpected episodes header {header:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != EPISODE_COLUMNS.len() {
                return Err(Error::Parse(format!("row {}: expected 8 cells", i + 1)));
            }
            let int = |k: usize| -> Result<usize> {
                cells[k]
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {} {}: {e}", i + 1, EPISODE_COLUMNS[k])))
            };
            let float = |k: usize| -> Result<f64> {
                cells[k]
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {} {}: {e}", i + 1, EPISODE_COLUMNS[k])))
            };
            Ok(EpisodeRecord {
                trial: int(0)?,
                episode: int(1)?,
                reward_sum: float(2)?,
                punish_sum: float(3)?,
                ret: float(4)?,
                mean_gamma_r: float(5)?,
                mean_gamma_q: float(6)?,
                steps: int(7)?,
            })
        })
        .collect()
}

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    parse_episodes_csv(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMeta {
    pub case: String,
    pub config: ExperimentConfig,
    pub episodes: usize,
    pub trial_seeds: Vec<u64>,
    pub successful_trials: usize,
    pub failed_trials: Vec<FailedTrial>,
    pub rejected_steps: u64,
    /// Per-channel discount averages over the final quarter of episodes.
    pub final_quarter_gamma_r: Option<f64>,
    pub final_quarter_gamma_q: Option<f64>,
}

impl CaseMeta {
    pub fn of(case: &CaseResult) -> Self {
        let gammas = final_window_gammas(case, 0.25);
        Self {
            case: case.name.clone(),
            config: case.config.clone(),
            episodes: case.config.episodes(),
            trial_seeds: case.trial_seeds(),
            successful_trials: case.successful().count(),
            failed_trials: case
                .outcomes
                .iter()
                .filter_map(|o| {
                    o.result.as_ref().err().map(|e| FailedTrial {
                        trial: o.trial,
                        seed: o.seed,
                        error: e.to_string(),
                    })
                })
                .collect(),
            rejected_steps: case.rejected_steps(),
            final_quarter_gamma_r: gammas.map(|g| g.0),
            final_quarter_gamma_q: gammas.map(|g| g.1),
        }
    }
}

/// Writes `episodes.csv`, `curve.csv` and `meta.json` for one case into `dir`.
pub fn write_case(case: &CaseResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_episodes_csv(&case.records(), &dir.join("episodes.csv"))?;
    write_curve_csv(&case.curve, &dir.join("curve.csv"))?;
    let meta = serde_json::to_string_pretty(&CaseMeta::of(case))?;
    fs::write(dir.join("meta.json"), meta + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::aggregate::aggregate;
    use proptest::prelude::*;

    fn rec(trial: usize, episode: usize) -> EpisodeRecord {
        EpisodeRecord {
            trial,
            episode,
            reward_sum: 123.456789012,
            punish_sum: 1.0,
            ret: 122.456789012,
            mean_gamma_r: 0.98765432109,
            mean_gamma_q: 1.0 / 3.0,
            steps: 250,
        }
    }

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(-2.5), "-2.5");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333");
        assert_eq!(format_float(123.456789012), "123.456789");
        assert_eq!(format_float(0.99999999999), "1");
        assert_eq!(format_float(1.5e-7), "1.5e-7");
        assert_eq!(format_float(123456789012.0), "1.23456789e11");
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn episodes_csv_shape() {
        assert_eq!(
            render_episodes_csv(&[]),
            "trial,episode,reward_sum,punish_sum,return,mean_gamma_r,mean_gamma_q,steps\n"
        );
        let one = render_episodes_csv(&[rec(0, 0)]);
        assert_eq!(one.lines().count(), 2);
        assert_eq!(
            one.lines().nth(1).unwrap(),
            "0,0,123.456789,1,122.456789,0.987654321,0.333333333,250"
        );
        let records = vec![rec(0, 0), rec(0, 1), rec(1, 0)];
        assert_eq!(render_episodes_csv(&records), render_episodes_csv(&records));
    }

    #[test]
    fn csv_files_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![rec(0, 0), rec(1, 0)];
        let path = dir.path().join("episodes.csv");
        write_episodes_csv(&records, &path).unwrap();
        let first = fs::read(&path).unwrap();
        write_episodes_csv(&records, &path).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
        let back = read_episodes_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].trial, 1);
        assert!((back[0].mean_gamma_q - 1.0 / 3.0).abs() < 1e-9);

        let curve = aggregate(&[&records[..1], &records[1..]], 1);
        let text = render_curve_csv(&curve);
        assert!(text.starts_with("episode,reward_sum_mean,reward_sum_std,punish_sum_mean"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(parse_episodes_csv("").is_err());
        assert!(parse_episodes_csv("a,b\n").is_err());
        let bad = format!("{}\n0,0,1,2\n", EPISODE_COLUMNS.join(","));
        assert!(parse_episodes_csv(&bad).is_err());
    }

    proptest! {
        #[test]
        fn formatted_floats_keep_nine_digits(x in -1e12..1e12f64) {
            let back: f64 = format_float(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-9 * x.abs().max(1e-300));
        }
    }
}
