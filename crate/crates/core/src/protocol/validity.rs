use serde::{Deserialize, Serialize};

use crate::numerics::student_t::ln_gamma;
use crate::predictors::wilks::{wilks_error, wilks_predict};
use crate::protocol::{OnlineLedger, PValueTrace};

/// Coverage of the two-sided error-count bands.
pub const BAND_LEVEL: f64 = 0.99;

/// Central `level` band `[lo, hi]` of the Binomial(`trials`, `p`) count:
/// `lo` and `hi` are the `(1 - level)/2` and `(1 + level)/2` quantiles.
pub fn binomial_band(trials: u64, p: f64, level: f64) -> (u64, u64) {
    let pmf: Vec<f64> = (0..=trials)
        .map(|k| {
            if p == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            if p == 1.0 {
                return if k == trials { 1.0 } else { 0.0 };
            }
            let (n, k) = (trials as f64, k as f64);
            (ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0) + k * p.ln() + (n - k) * (-p).ln_1p()).exp()
        })
        .collect();
    quantile_band(&pmf, level)
}

/// Central band of the number of successes among independent Bernoulli
/// trials with success probabilities `probs`.
pub fn poisson_binomial_band(probs: &[f64], level: f64) -> (u64, u64) {
    let mut pmf = vec![1.0];
    for &p in probs {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &mass) in pmf.iter().enumerate() {
            next[k] += mass * (1.0 - p);
            next[k + 1] += mass * p;
        }
        pmf = next;
    }
    quantile_band(&pmf, level)
}

fn quantile_band(pmf: &[f64], level: f64) -> (u64, u64) {
    let tail = (1.0 - level) / 2.0;
    let mut cdf = 0.0;
    let mut lo = None;
    for (k, &mass) in pmf.iter().enumerate() {
        cdf += mass;
        if lo.is_none() && cdf >= tail {
            lo = Some(k as u64);
        }
        if cdf >= 1.0 - tail - 1e-12 {
            return (lo.unwrap_or(k as u64), k as u64);
        }
    }
    let last = pmf.len().saturating_sub(1) as u64;
    (lo.unwrap_or(last), last)
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `values` and the uniform distribution on `[0, 1]`.
pub fn ks_statistic(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` for a sample of size `n`,
/// with Stephens's small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Lag-1 sample autocorrelation of the error bits; 0 when they are
/// constant.
pub fn lag1_autocorrelation(bits: &[bool]) -> f64 {
    let n = bits.len();
    if n < 2 {
        return 0.0;
    }
    let x: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    num / denom
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub epsilon: f64,
    pub steps: usize,
    pub errors: u64,
    pub frequency: f64,
    /// 99% band of the error count under Binomial(`steps`, `epsilon`).
    pub band: (u64, u64),
    pub within_band: bool,
    /// Fewer errors than the band allows.
    pub conservative: bool,
    pub lag1_autocorrelation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityDiagnostics {
    pub count: usize,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub predictor: String,
    /// First step (1-based) included in the level diagnostics.
    pub first_step: usize,
    pub levels: Vec<LevelDiagnostics>,
    pub uniformity: Option<UniformityDiagnostics>,
}

/// Error frequencies against their binomial bands over steps
/// `n ≥ first_step`, and uniformity of the p-values when a trace is given.
pub fn validity_report(ledger: &OnlineLedger, trace: Option<&PValueTrace>, first_step: usize) -> ValidityReport {
    let skip = first_step.saturating_sub(1).min(ledger.steps());
    let levels = ledger
        .levels
        .iter()
        .enumerate()
        .map(|(j, &epsilon)| {
            let bits = &ledger.errors(j)[skip..];
            let steps = bits.len();
            let errors = bits.iter().filter(|&&b| b).count() as u64;
            let band = binomial_band(steps as u64, epsilon, BAND_LEVEL);
            LevelDiagnostics {
                epsilon,
                steps,
                errors,
                frequency: if steps == 0 { 0.0 } else { errors as f64 / steps as f64 },
                band,
                within_band: band.0 <= errors && errors <= band.1,
                conservative: errors < band.0,
                lag1_autocorrelation: lag1_autocorrelation(bits),
            }
        })
        .collect();
    let uniformity = trace.filter(|t| !t.is_empty()).map(|t| {
        let d = ks_statistic(&t.p_values);
        UniformityDiagnostics {
            count: t.len(),
            ks_statistic: d,
            ks_p_value: ks_p_value(d, t.len()),
        }
    });
    ValidityReport {
        predictor: ledger.predictor.clone(),
        first_step,
        levels,
        uniformity,
    }
}

/// Order-statistic intervals run on-line from step `2r + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WilksRun {
    pub errors: Vec<bool>,
    /// Significance level `2r / n` of each recorded step.
    pub levels: Vec<f64>,
}

impl WilksRun {
    pub fn error_count(&self) -> u64 {
        self.errors.iter().filter(|&&b| b).count() as u64
    }

    /// 99% band of the error count; the levels differ per step.
    pub fn band(&self) -> (u64, u64) {
        poisson_binomial_band(&self.levels, BAND_LEVEL)
    }

    pub fn within_band(&self) -> bool {
        let (lo, hi) = self.band();
        (lo..=hi).contains(&self.error_count())
    }
}

pub fn wilks_online(responses: &[f64], r: usize) -> WilksRun {
    let mut run = WilksRun {
        errors: Vec::new(),
        levels: Vec::new(),
    };
    for n in 1..=responses.len() {
        let (interval, level) = wilks_predict(&responses[..n - 1], r);
        if let Some(level) = level {
            run.errors.push(wilks_error(&interval, responses[n - 1]));
            run.levels.push(level);
        }
    }
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::PredictionInterval;

    #[test]
    fn ks_equispaced() {
        assert!((ks_statistic(&[0.1, 0.3, 0.5, 0.7, 0.9]) - 0.1).abs() < 1e-15);
        assert_eq!(ks_p_value(0.0, 100), 1.0);
        assert!(ks_p_value(0.5, 100) < 1e-10);
        // Critical value of the 1% test is about 1.628 / √n.
        let n = 2000;
        let crit = 1.6276 / (n as f64).sqrt();
        assert!((ks_p_value(crit, n) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn binomial_band_brackets_mean() {
        let (lo, hi) = binomial_band(1000, 0.05, 0.99);
        assert!(lo < 50 && hi > 50);
        // Normal approximation: 50 ± 2.58 · √47.5 ≈ [32, 68].
        assert!((lo as i64 - 33).abs() <= 2 && (hi as i64 - 68).abs() <= 2, "{lo} {hi}");
        assert_eq!(binomial_band(10, 0.0, 0.99), (0, 0));
        let probs = vec![0.05; 1000];
        assert_eq!(poisson_binomial_band(&probs, 0.99), (lo, hi));
    }

    #[test]
    fn autocorrelation() {
        assert_eq!(lag1_autocorrelation(&[false; 10]), 0.0);
        let alternating: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        assert!(lag1_autocorrelation(&alternating) < -0.9);
    }

    #[test]
    fn report_flags_conservative_zero_errors() {
        let mut ledger = OnlineLedger::new("x", vec![0.1]);
        for _ in 0..200 {
            ledger.record(&[PredictionInterval::full()], 0.0);
        }
        let report = validity_report(&ledger, None, 1);
        let level = &report.levels[0];
        assert_eq!((level.errors, level.frequency), (0, 0.0));
        assert!(level.conservative && !level.within_band);
        assert!(report.uniformity.is_none());
    }

    #[test]
    fn wilks_run_levels() {
        let ys = [0.5, 0.1, 0.9, 0.3, 0.7, 0.2];
        let run = wilks_online(&ys, 2);
        assert_eq!(run.levels, vec![0.8, 4.0 / 6.0]);
        assert_eq!(run.errors, vec![true, true]);
    }
}
