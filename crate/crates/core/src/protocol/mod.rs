//! The on-line prediction protocol: at each step the predictor sees `x_n`,
//! outputs one interval per level, then `y_n` is revealed and the errors and
//! interval lengths are recorded.

mod fisher;
mod ledger;
mod validity;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::{ConfidencePredictor, EpsilonLadder, History, Observation};

pub use fisher::{fisher_verify, FisherMode};
pub use ledger::{median_accuracy, OnlineLedger, RunningMedian};
pub use validity::{
    binomial_band, ks_p_value, ks_statistic, lag1_autocorrelation, poisson_binomial_band, validity_report,
    wilks_online, LevelDiagnostics, UniformityDiagnostics, ValidityReport, WilksRun, BAND_LEVEL,
};

/// Realized p-values and the smoothing draws used for them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PValueTrace {
    pub p_values: Vec<f64>,
    pub taus: Vec<f64>,
}

impl PValueTrace {
    pub fn len(&self) -> usize {
        self.p_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnlineConfig {
    /// Draw `τ_n` uniformly; otherwise `τ_n = 1`.
    pub smoothed: bool,
    pub seed: u64,
    /// Also compute the realized p-value at each step.
    pub record_p_values: bool,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            smoothed: false,
            seed: 0,
            record_p_values: true,
        }
    }
}

/// Ledger of a run, with the p-value trace when the predictor provides one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineRecord {
    pub ledger: OnlineLedger,
    pub trace: Option<PValueTrace>,
}

/// Runs the protocol over `stream`.
pub fn run_online(
    predictor: &dyn ConfidencePredictor<f64>,
    stream: &[Observation<f64>],
    ladder: &EpsilonLadder<f64>,
    config: &OnlineConfig,
) -> Result<OnlineRecord> {
    let dim = stream.first().map_or(0, Observation::dim);
    let mut history = History::new(dim);
    let mut ledger = OnlineLedger::new(predictor.name(), ladder.levels().to_vec());
    let mut trace = config.record_p_values.then(PValueTrace::default);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for obs in stream {
        if obs.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: obs.dim(),
            });
        }
        let tau = if config.smoothed { rng.random::<f64>() } else { 1.0 };
        let intervals = predictor.predict(&history, &obs.explanatory, ladder, tau)?;
        debug_assert!(intervals.windows(2).all(|w| w[0].is_subset_of(&w[1])), "intervals are not nested");
        ledger.record(&intervals, obs.response);
        if let Some(t) = trace.as_mut() {
            match predictor.p_value(&history, obs, tau)? {
                Some(p) => {
                    t.p_values.push(p);
                    t.taus.push(tau);
                }
                None => trace = None,
            }
        }
        history.push(obs.clone())?;
    }
    Ok(OnlineRecord { ledger, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::{EmptyPredictor, FullLinePredictor, GaussPredictor};

    fn stream(n: usize) -> Vec<Observation<f64>> {
        (0..n).map(|i| Observation::new(vec![i as f64 * 0.1], (i as f64 * 1.3).sin())).collect()
    }

    #[test]
    fn full_line_never_errs() {
        let ladder = EpsilonLadder::new(vec![0.1, 0.05]).unwrap();
        let rec = run_online(&FullLinePredictor, &stream(10), &ladder, &OnlineConfig::default()).unwrap();
        for level in 0..2 {
            assert_eq!(rec.ledger.cumulative(level).last(), Some(&0));
            assert!(rec.ledger.lengths(level).iter().all(|l| l.is_infinite()));
        }
        assert_eq!(rec.trace.unwrap().p_values, vec![1.0; 10]);
    }

    #[test]
    fn empty_always_errs() {
        let ladder = EpsilonLadder::new(vec![0.1]).unwrap();
        let rec = run_online(&EmptyPredictor, &stream(7), &ladder, &OnlineConfig::default()).unwrap();
        assert_eq!(rec.ledger.cumulative(0), &[1, 2, 3, 4, 5, 6, 7]);
        assert!(rec.ledger.lengths(0).iter().all(|&l| l == 0.0));
        assert!(rec.trace.is_none());
    }

    #[test]
    fn dimension_mismatch() {
        let mut s = stream(3);
        s.push(Observation::new(vec![1.0, 2.0], 0.0));
        let ladder = EpsilonLadder::new(vec![0.1]).unwrap();
        assert!(matches!(
            run_online(&GaussPredictor, &s, &ladder, &OnlineConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn smoothed_taus_are_seeded() {
        let ladder = EpsilonLadder::new(vec![0.1]).unwrap();
        let config = OnlineConfig { smoothed: true, seed: 3, record_p_values: true };
        let a = run_online(&FullLinePredictor, &stream(5), &ladder, &config).unwrap();
        let b = run_online(&FullLinePredictor, &stream(5), &ladder, &config).unwrap();
        assert_eq!(a, b);
        let t = a.trace.unwrap();
        assert!(t.taus.iter().all(|&x| (0.0..1.0).contains(&x)));
        assert_eq!(t.p_values, t.taus);
    }
}
