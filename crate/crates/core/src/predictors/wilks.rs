//! Distribution-free order-statistic prediction intervals.
//!
//! With the first `n - 1` responses sorted, the interval between the `r`-th
//! smallest and the `r`-th largest misses the `n`-th response with
//! probability exactly `2r / n` for continuous IID data.

use crate::predictors::PredictionInterval;
use crate::Scalar;

/// Interval and its significance level `2r / n`, or the whole line and
/// `None` while `n ≤ 2r`.
pub fn wilks_predict<T: Scalar>(responses: &[T], r: usize) -> (PredictionInterval<T>, Option<T>) {
    assert!(r >= 1, "order-statistic rank must be positive");
    let n = responses.len() + 1;
    if n < 2 * r + 1 {
        return (PredictionInterval::full(), None);
    }
    let mut sorted = responses.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let interval = PredictionInterval {
        lower: sorted[r - 1],
        upper: sorted[n - 1 - r],
    };
    (interval, Some(T::from_count(2 * r) / T::from_count(n)))
}

/// Whether `y` falls outside the open interval.
pub fn wilks_error<T: Scalar>(interval: &PredictionInterval<T>, y: T) -> bool {
    !(interval.lower < y && y < interval.upper)
}
