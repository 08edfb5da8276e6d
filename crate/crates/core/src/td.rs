//! Hyperbolically-discounted TD kernel.
//!
//! Hyperbolic discounting weights a signal `k` steps ahead by `1 / (1 + κk)`.
//! That return has no exact one-step recursion, so learning uses a
//! state-dependent discount instead:
//!
//! ```text
//! γ(s) = 1 - κ V(s) / (μ + β σ)^p
//! δ    = (1 - γ̄) x + γ(s) V(s') - V(s)
//! ```
//!
//! where `μ`, `σ` are running statistics of the raw (non-negative) signal `x`
//! and `γ̄` is a running average of the discounts produced so far. Every
//! function here is pure; [`RunningStats`] is a small `Copy` value.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Floor on `(μ + βσ)^p` so the discount stays defined before any signal is seen.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

/// Default smoothing rate of the signal statistics and the discount average.
pub const DEFAULT_EMA_RATE: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Hyperbolic curvature κ.
    pub kappa: f64,
    /// Exponent applied to the denominator `μ + βσ`.
    pub exponent: f64,
    /// Weight β of the standard deviation in the denominator bias.
    pub beta: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            kappa: 0.01,
            exponent: 1.0,
            beta: 0.1,
        }
    }
}

impl HyperParams {
    pub fn new(kappa: f64, exponent: f64, beta: f64) -> Result<Self> {
        let hp = Self { kappa, exponent, beta };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("kappa", self.kappa)?;
        ensure_finite("exponent", self.exponent)?;
        ensure_finite("beta", self.beta)?;
        if self.kappa < 0.0 {
            return Err(Error::InvalidInput(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if self.exponent <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "exponent must be > 0, got {}",
                self.exponent
            )));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidInput(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Exponential moving statistics of one channel's raw signal, plus the
/// running average of the effective discounts applied on that channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: f64,
    /// Tracked variance; `std()` is its square root.
    pub var: f64,
    /// γ̄, starts at 0 so that nothing is compensated before evidence exists.
    pub avg_discount: f64,
    pub ema_rate: f64,
    pub count: u64,
}

impl Default for RunningStats {
    fn default() -> Self {
        Self::new(DEFAULT_EMA_RATE)
    }
}

impl RunningStats {
    pub fn new(ema_rate: f64) -> Self {
        assert!(
            ema_rate > 0.0 && ema_rate <= 1.0,
            "ema_rate must lie in (0, 1], got {ema_rate}"
        );
        Self {
            mean: 0.0,
            var: 0.0,
            avg_discount: 0.0,
            ema_rate,
            count: 0,
        }
    }

    pub fn std(&self) -> f64 {
        self.var.max(0.0).sqrt()
    }
}

/// Result of one channel's TD computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdOutcome {
    pub delta: f64,
    pub gamma_eff: f64,
    pub scaled_signal: f64,
}

fn ensure_nonnegative(name: &str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value < 0.0 {
        return Err(Error::InvalidInput(format!("{name} must be >= 0, got {value}")));
    }
    Ok(value)
}

fn ensure_unit(name: &str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidInput(format!("{name} must lie in [0, 1], got {value}")));
    }
    Ok(value)
}

/// State-dependent discount `clamp(1 - κV / max(floor, (μ + βσ)^p), 0, 1)`.
pub fn effective_discount(v_now: f64, stats: &RunningStats, hp: &HyperParams) -> Result<f64> {
    ensure_nonnegative("v_now", v_now)?;
    ensure_nonnegative("stats.mean", stats.mean)?;
    ensure_nonnegative("stats.var", stats.var)?;
    hp.validate()?;

    let denominator = (stats.mean + hp.beta * stats.std())
        .powf(hp.exponent)
        .max(DENOMINATOR_FLOOR);
    let gamma = 1.0 - hp.kappa * v_now / denominator;
    Ok(gamma.clamp(0.0, 1.0))
}

/// One-step TD error `x + γ V(s') - V(s)`, with `V(s') = 0` on terminal transitions.
pub fn hyper_td_error(signal_scaled: f64, gamma_eff: f64, v_now: f64, v_next: f64, terminal: bool) -> Result<f64> {
    ensure_finite("signal_scaled", signal_scaled)?;
    ensure_unit("gamma_eff", gamma_eff)?;
    ensure_finite("v_now", v_now)?;
    ensure_finite("v_next", v_next)?;
    let bootstrap = if terminal { 0.0 } else { v_next };
    Ok(signal_scaled + gamma_eff * bootstrap - v_now)
}

/// Shrinks a raw signal by `(1 - γ̄)` so the learned value stays on the raw signal's scale.
pub fn compensate_scale(signal_raw: f64, avg_discount: f64) -> Result<f64> {
    ensure_finite("signal_raw", signal_raw)?;
    ensure_unit("avg_discount", avg_discount)?;
    Ok(signal_raw * (1.0 - avg_discount))
}

/// Absorbs one raw sample into the exponential moving mean and variance.
pub fn update_stats(stats: &RunningStats, sample: f64) -> Result<RunningStats> {
    ensure_nonnegative("sample", sample)?;
    let rate = stats.ema_rate;
    let mean = (1.0 - rate) * stats.mean + rate * sample;
    // The product (x - μ)(x - μ') is never negative: μ' lies between μ and x.
    let var = (1.0 - rate) * stats.var + rate * (sample - stats.mean) * (sample - mean);
    Ok(RunningStats {
        mean,
        var: var.max(0.0),
        count: stats.count + 1,
        ..*stats
    })
}

pub fn update_avg_discount(stats: &RunningStats, gamma_eff: f64) -> Result<RunningStats> {
    ensure_unit("gamma_eff", gamma_eff)?;
    let rate = stats.ema_rate;
    let avg = (1.0 - rate) * stats.avg_discount + rate * gamma_eff;
    Ok(RunningStats {
        avg_discount: avg.clamp(0.0, 1.0),
        ..*stats
    })
}

/// Full per-channel TD step on frozen statistics.
pub fn channel_td(
    signal_raw: f64,
    v_now: f64,
    v_next: f64,
    terminal: bool,
    stats: &RunningStats,
    hp: &HyperParams,
    compensate: bool,
) -> Result<TdOutcome> {
    let gamma_eff = effective_discount(v_now, stats, hp)?;
    let scaled_signal = if compensate {
        compensate_scale(signal_raw, stats.avg_discount)?
    } else {
        ensure_finite("signal_raw", signal_raw)?
    };
    let delta = hyper_td_error(scaled_signal, gamma_eff, v_now, v_next, terminal)?;
    Ok(TdOutcome {
        delta,
        gamma_eff,
        scaled_signal,
    })
}

/// Truncated hyperbolic return `Σ x_k / (1 + κk)`. Test oracle.
pub fn hyperbolic_return_oracle(signals: &[f64], kappa: f64) -> f64 {
    signals
        .iter()
        .enumerate()
        .map(|(k, x)| x / (1.0 + kappa * k as f64))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats(mean: f64, std: f64) -> RunningStats {
        RunningStats {
            mean,
            var: std * std,
            ..RunningStats::default()
        }
    }

    #[test]
    fn defaults_are_the_published_values() {
        let hp = HyperParams::default();
        assert_eq!((hp.kappa, hp.exponent, hp.beta), (0.01, 1.0, 0.1));
    }

    #[test]
    fn hyperparams_reject_out_of_domain() {
        assert!(HyperParams::new(-0.1, 1.0, 0.1).is_err());
        assert!(HyperParams::new(0.01, 0.0, 0.1).is_err());
        assert!(HyperParams::new(0.01, 1.0, -1.0).is_err());
        assert!(HyperParams::new(f64::NAN, 1.0, 0.1).is_err());
    }

    #[test]
    fn discount_examples() {
        let hp = HyperParams::default();
        assert_eq!(effective_discount(0.0, &stats(3.0, 2.0), &hp).unwrap(), 1.0);
        assert_eq!(effective_discount(0.0, &RunningStats::default(), &hp).unwrap(), 1.0);

        // Independent scalar evaluation: 1 - 0.01 * 50 / (1 + 0.1 * 0)^1.
        let expected: f64 = 1.0 - 0.01 * 50.0 / 1.0;
        assert!((expected - 0.5).abs() < 1e-15);
        let got = effective_discount(50.0, &stats(1.0, 0.0), &hp).unwrap();
        assert!((got - expected).abs() < 1e-15);

        // Raw value 1 - 2 = -1 is clamped.
        assert_eq!(effective_discount(200.0, &stats(1.0, 0.0), &hp).unwrap(), 0.0);
    }

    #[test]
    fn discount_uses_floor_before_statistics_exist() {
        let hp = HyperParams::default();
        let fresh = RunningStats::default();
        // 0.01 * 1e-9 / 1e-6 = 1e-5
        let g = effective_discount(1e-9, &fresh, &hp).unwrap();
        assert!((g - (1.0 - 1e-5)).abs() < 1e-15);
        assert_eq!(effective_discount(1.0, &fresh, &hp).unwrap(), 0.0);
    }

    #[test]
    fn discount_rejects_bad_inputs() {
        let hp = HyperParams::default();
        assert!(effective_discount(f64::NAN, &stats(1.0, 0.0), &hp).is_err());
        assert!(effective_discount(f64::INFINITY, &stats(1.0, 0.0), &hp).is_err());
        assert!(effective_discount(1.0, &stats(f64::NAN, 0.0), &hp).is_err());
        assert!(effective_discount(-1.0, &stats(1.0, 0.0), &hp).is_err());
    }

    #[test]
    fn td_error_examples() {
        assert_eq!(hyper_td_error(0.0, 1.0, 7.0, 7.0, false).unwrap(), 0.0);
        let d = hyper_td_error(1.0, 0.9, 10.0, 10.0, false).unwrap();
        assert!(d.abs() < 1e-12);
        assert_eq!(hyper_td_error(1.0, 0.9, 2.0, 1234.5, true).unwrap(), -1.0);
        assert!(hyper_td_error(f64::NAN, 0.9, 2.0, 1.0, false).is_err());
        assert!(hyper_td_error(1.0, 1.5, 2.0, 1.0, false).is_err());
    }

    #[test]
    fn compensation_examples() {
        assert_eq!(compensate_scale(5.0, 0.0).unwrap(), 5.0);
        assert_eq!(compensate_scale(5.0, 1.0).unwrap(), 0.0);
        assert!((compensate_scale(1.0, 0.99).unwrap() - 0.01).abs() < 1e-15);
        assert!(compensate_scale(f64::INFINITY, 0.5).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = RunningStats {
            mean: 10.0,
            var: 4.0,
            ..RunningStats::new(1.0)
        };
        let s = update_stats(&s, 3.0).unwrap();
        assert_eq!((s.mean, s.std(), s.count), (3.0, 0.0, 1));

        let s = update_stats(&RunningStats::new(0.5), 2.0).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.var, 1.0);
        assert_eq!(s.std(), 1.0);

        let mut s = RunningStats::new(0.05);
        s = update_stats(&s, 9.0).unwrap();
        for _ in 0..2000 {
            s = update_stats(&s, 4.0).unwrap();
        }
        assert!((s.mean - 4.0).abs() < 1e-12);
        assert!(s.std() < 1e-12);

        assert!(update_stats(&s, f64::NAN).is_err());
    }

    #[test]
    fn avg_discount_examples() {
        let mut s = RunningStats::new(0.3);
        s.avg_discount = 0.5;
        assert_eq!(update_avg_discount(&s, 0.5).unwrap().avg_discount, 0.5);

        let s = RunningStats::new(0.1);
        assert!((update_avg_discount(&s, 1.0).unwrap().avg_discount - 0.1).abs() < 1e-15);

        let s = RunningStats::new(1.0);
        assert_eq!(update_avg_discount(&s, 0.7).unwrap().avg_discount, 0.7);
        assert!(update_avg_discount(&s, 1.2).is_err());
    }

    #[test]
    fn return_oracle_examples() {
        assert_eq!(hyperbolic_return_oracle(&[], 0.3), 0.0);
        assert_eq!(hyperbolic_return_oracle(&[1.0, 2.0, 3.0], 0.0), 6.0);
        let v = hyperbolic_return_oracle(&[1.0, 1.0, 1.0], 0.01);
        // 1 + 1/1.01 + 1/1.02, summed independently to 9 digits.
        assert!((v - 2.970_491_167).abs() < 1e-9, "{v}");
    }

    #[test]
    fn kappa_zero_gives_undiscounted_td() {
        let hp = HyperParams::new(0.0, 1.0, 0.1).unwrap();
        for v in [0.0, 0.3, 17.0, 1e6] {
            assert_eq!(effective_discount(v, &stats(0.0, 0.0), &hp).unwrap(), 1.0);
            let out = channel_td(0.7, v, 2.0, false, &stats(0.4, 0.1), &hp, false).unwrap();
            assert_eq!(out.delta, 0.7 + 2.0 - v);
        }
    }

    /// Tabular fixed point on a deterministic chain, solved by brute-force
    /// iteration of the TD residual with the kernel's own discount.
    #[test]
    fn chain_value_iteration_reaches_fixed_point() {
        let hp = HyperParams::default();
        let n = 6;
        // Reward only on the final (terminal) transition.
        let signals: Vec<f64> = (0..n).map(|i| if i + 1 == n { 1.0 } else { 0.0 }).collect();
        let st = RunningStats {
            mean: 1.0 / n as f64,
            var: (1.0 / n as f64) * (1.0 - 1.0 / n as f64),
            avg_discount: 0.9,
            ..RunningStats::default()
        };

        let mut v = vec![0.0; n];
        for _ in 0..10_000 {
            let mut max_delta: f64 = 0.0;
            for s in (0..n).rev() {
                let terminal = s + 1 == n;
                let next = if terminal { 0.0 } else { v[s + 1] };
                let out = channel_td(signals[s], v[s], next, terminal, &st, &hp, true).unwrap();
                v[s] = (v[s] + 0.5 * out.delta).max(0.0);
                max_delta = max_delta.max(out.delta.abs());
            }
            if max_delta < 1e-14 {
                break;
            }
        }
        for s in 0..n {
            let terminal = s + 1 == n;
            let next = if terminal { 0.0 } else { v[s + 1] };
            let out = channel_td(signals[s], v[s], next, terminal, &st, &hp, true).unwrap();
            assert!(out.delta.abs() < 1e-10, "state {s}: residual {}", out.delta);
            assert!((0.0..=1.0).contains(&out.gamma_eff));
        }
        // Values decay away from the rewarded end.
        assert!(v.windows(2).all(|w| w[0] <= w[1]), "{v:?}");
        assert!((v[n - 1] - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn discount_in_unit_interval(v in 0.0..1e4f64, mean in 0.0..10.0f64, std in 0.0..10.0f64,
                                     kappa in 0.0..1.0f64, exponent in 0.1..3.0f64, beta in 0.0..2.0f64) {
            let hp = HyperParams { kappa, exponent, beta };
            let g = effective_discount(v, &stats(mean, std), &hp).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
        }

        #[test]
        fn discount_monotone(v in 0.0..100.0f64, dv in 0.0..100.0f64, mean in 0.0..5.0f64,
                             dm in 0.0..5.0f64, std in 0.0..5.0f64, kappa in 0.0..0.5f64, dk in 0.0..0.5f64) {
            let hp = HyperParams { kappa, exponent: 1.0, beta: 0.1 };
            let base = effective_discount(v, &stats(mean, std), &hp).unwrap();
            prop_assert!(effective_discount(v + dv, &stats(mean, std), &hp).unwrap() <= base);
            let hp2 = HyperParams { kappa: kappa + dk, ..hp };
            prop_assert!(effective_discount(v, &stats(mean, std), &hp2).unwrap() <= base);
            prop_assert!(effective_discount(v, &stats(mean + dm, std), &hp).unwrap() >= base);
        }

        #[test]
        fn fixed_point_identity(v in 0.0..1e6f64) {
            prop_assert_eq!(hyper_td_error(0.0, 1.0, v, v, false).unwrap(), 0.0);
        }

        #[test]
        fn compensation_is_linear(x in 0.0..100.0f64, a in 0.0..100.0f64, g in 0.0..=1.0f64) {
            let lhs = compensate_scale(a * x, g).unwrap();
            let rhs = a * compensate_scale(x, g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn stats_std_stays_nonnegative(samples in proptest::collection::vec(0.0..1e3f64, 1..200),
                                       rate in 0.001..=1.0f64) {
            let mut s = RunningStats::new(rate);
            for x in samples {
                s = update_stats(&s, x).unwrap();
                prop_assert!(s.var >= 0.0 && s.std() >= 0.0);
                s = update_avg_discount(&s, (x / 1e3).min(1.0)).unwrap();
                prop_assert!((0.0..=1.0).contains(&s.avg_discount));
            }
        }

        #[test]
        fn return_oracle_matches_direct_sum(signals in proptest::collection::vec(0.0..10.0f64, 0..50),
                                            kappa in 0.0..1.0f64) {
            let mut direct = 0.0;
            for (k, x) in signals.iter().enumerate() {
                direct += x / (1.0 + kappa * k as f64);
            }
            let got = hyperbolic_return_oracle(&signals, kappa);
            prop_assert!((got - direct).abs() <= 1e-12);
            let plain: f64 = signals.iter().sum();
            prop_assert_eq!(hyperbolic_return_oracle(&signals, 0.0), plain);
            if kappa > 0.0 && signals.iter().skip(1).any(|&x| x > 0.0) {
                prop_assert!(got < plain);
            }
        }
    }
}
