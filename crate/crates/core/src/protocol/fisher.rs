use crate::error::{Error, Result};
use crate::numerics::{t_quantile, StudentT};
use crate::predictors::gauss::gauss_predict;
use crate::predictors::{EpsilonLadder, History, Observation};

/// Which observations the `m`-th check may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMode {
    /// Only the `l` observations of the `m`-th batch.
    Isolated,
    /// All `m(l + 1) - 1` observations before the test value.
    Cumulative,
}

/// Error bits of Fisher's verification protocol for the Gaussian model
/// without explanatory variables. The stream is cut into batches of `l`
/// sample values followed by one test value.
pub fn fisher_verify(responses: &[f64], l: usize, epsilon: f64, mode: FisherMode) -> Result<Vec<bool>> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("sample size must be at least 2, got {l}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("significance level {epsilon} is outside (0, 1)")));
    }
    let batches = responses.len() / (l + 1);
    if batches == 0 {
        return Err(Error::InsufficientData {
            needed: l + 1,
            have: responses.len(),
        });
    }
    match mode {
        FisherMode::Isolated => {
            let t = t_quantile(&StudentT::new((l - 1) as u64)?, epsilon / 2.0)?;
            let widen = ((l + 1) as f64 / l as f64).sqrt();
            Ok(responses
                .chunks_exact(l + 1)
                .map(|batch| {
                    let (sample, test) = batch.split_at(l);
                    let mean = sample.iter().sum::<f64>() / l as f64;
                    let ss: f64 = sample.iter().map(|y| (y - mean).powi(2)).sum();
                    let half = t * widen * (ss / (l - 1) as f64).sqrt();
                    (test[0] - mean).abs() > half
                })
                .collect())
        }
        FisherMode::Cumulative => {
            // The on-line classical interval with no explanatory variables.
            let ladder = EpsilonLadder::new(vec![epsilon])?;
            let mut history = History::new(0);
            let mut errors = Vec::with_capacity(batches);
            for (i, &y) in responses[..batches * (l + 1)].iter().enumerate() {
                if (i + 1) % (l + 1) == 0 {
                    let interval = gauss_predict(&history, &[], &ladder)?[0];
                    errors.push(!interval.contains(y));
                }
                history.push(Observation::new(Vec::new(), y))?;
            }
            Ok(errors)
        }
    }
}
