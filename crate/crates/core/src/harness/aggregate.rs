use serde::{Deserialize, Serialize};

use super::trial::EpisodeRecord;

/// The six per-episode metrics, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub reward_sum: f64,
    pub punish_sum: f64,
    pub ret: f64,
    pub mean_gamma_r: f64,
    pub mean_gamma_q: f64,
    pub steps: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 6] = [
        "reward_sum",
        "punish_sum",
        "return",
        "mean_gamma_r",
        "mean_gamma_q",
        "steps",
    ];

    pub fn of(record: &EpisodeRecord) -> Self {
        Self {
            reward_sum: record.reward_sum,
            punish_sum: record.punish_sum,
            ret: record.ret,
            mean_gamma_r: record.mean_gamma_r,
            mean_gamma_q: record.mean_gamma_q,
            steps: record.steps as f64,
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [
            self.reward_sum,
            self.punish_sum,
            self.ret,
            self.mean_gamma_r,
            self.mean_gamma_q,
            self.steps,
        ]
    }

    fn from_array(a: [f64; 6]) -> Self {
        Self {
            reward_sum: a[0],
            punish_sum: a[1],
            ret: a[2],
            mean_gamma_r: a[3],
            mean_gamma_q: a[4],
            steps: a[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    /// Trials contributing to this point.
    pub trials: usize,
    pub mean: Metrics,
    /// Sample standard deviation across trials (0 for a single trial).
    pub std: Metrics,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub points: Vec<CurvePoint>,
}

/// Mean and sample standard deviation of every metric across trials, per episode.
pub fn aggregate(trials: &[&[EpisodeRecord]], episodes: usize) -> AggregateCurve {
    let points = (0..episodes)
        .map(|episode| {
            let rows: Vec<[f64; 6]> = trials
                .iter()
                .filter_map(|records| records.get(episode))
                .map(|r| Metrics::of(r).to_array())
                .collect();
            let n = rows.len();
            let mut mean = [0.0; 6];
            let mut std = [0.0; 6];
            if n > 0 {
                for k in 0..6 {
                    mean[k] = rows.iter().map(|r| r[k]).sum::<f64>() / n as f64;
                    if n > 1 {
                        let ss: f64 = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum();
                        std[k] = (ss / (n - 1) as f64).sqrt();
                    }
                }
            }
            CurvePoint {
                episode,
                trials: n,
                mean: Metrics::from_array(mean),
                std: Metrics::from_array(std),
            }
        })
        .collect();
    AggregateCurve { points }
}
