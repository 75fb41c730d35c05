//! Classical prediction intervals of the Gauss linear model.
//!
//! With `l = n - 1` past observations, least-squares estimate `γ̂`, residual
//! scale `σ̂² = RSS / (l - K - 1)` and leverage `h = z'(Z'Z)^{-1}z` of the new
//! design row, the interval at level `ε` is
//! `ŷ ± t_{n-K-2}^{ε/2} √(1 + h) σ̂`. It is the whole line while `n < K + 3`.

use crate::error::{Error, Result};
use crate::numerics::linalg::{dot, factor_full_rank};
use crate::numerics::StudentT;
use crate::predictors::{
    design_row, ConfidencePredictor, EpsilonLadder, History, LinearSummary, Observation, PredictionInterval,
};
use crate::Scalar;

/// Least-squares fit to the history, evaluated at a new design row.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussFit<T> {
    pub coefficient_estimate: Vec<T>,
    pub sigma_hat: T,
    pub leverage: T,
    pub point_prediction: T,
    /// Degrees of freedom `n - K - 2` of the pivot.
    pub degrees_of_freedom: u64,
    /// Residual scale below which the fit counts as exact.
    pub rounding_floor: T,
}

impl<T: Scalar> GaussFit<T> {
    /// `√(1 + h) σ̂`.
    pub fn prediction_scale(&self) -> T {
        (T::one() + self.leverage).sqrt() * self.sigma_hat
    }
}

/// Fits the history (needs at least `K + 2` observations) and evaluates the
/// fit at `x_new`. Residuals are recomputed from the raw rows.
pub fn gauss_fit<T: Scalar>(history: &History<T>, x_new: &[T]) -> Result<GaussFit<T>> {
    history.check_dim(x_new)?;
    let k = history.dim();
    let l = history.len();
    if l < k + 2 {
        return Err(Error::InsufficientData { needed: k + 2, have: l });
    }
    let summary = history.summary();
    let normal = factor_full_rank(summary.gram())?;
    let gamma = normal.solve(summary.cross());
    let rss: T = history
        .design_rows()
        .iter()
        .zip(history.observations())
        .map(|(z, o)| {
            let r = o.response - dot(z, &gamma);
            r * r
        })
        .sum();
    let z = design_row(x_new);
    let y_scale = history.observations().iter().fold(T::zero(), |m, o| m.max(o.response.abs()));
    let rounding_floor = T::lit(64.0) * T::epsilon() * y_scale;
    let mut sigma_hat = (rss / T::from_count(l - k - 1)).sqrt();
    if sigma_hat <= rounding_floor {
        // Exact fit up to rounding.
        sigma_hat = T::zero();
    }
    Ok(GaussFit {
        sigma_hat,
        leverage: normal.inverse_quadratic_form(&z),
        point_prediction: dot(&gamma, &z),
        coefficient_estimate: gamma,
        degrees_of_freedom: (l - k - 1) as u64,
        rounding_floor,
    })
}

/// Half-width `t √(1 + h) σ̂` at significance level `epsilon`.
fn half_width<T: Scalar>(fit: &GaussFit<T>, epsilon: T) -> Result<T> {
    let t = StudentT::new(fit.degrees_of_freedom)?.upper_point(epsilon / T::lit(2.0))?;
    Ok(t * fit.prediction_scale())
}

pub fn gauss_predict<T: Scalar>(
    history: &History<T>,
    x_new: &[T],
    ladder: &EpsilonLadder<T>,
) -> Result<Vec<PredictionInterval<T>>> {
    history.check_dim(x_new)?;
    let n = history.len() + 1;
    if n < history.dim() + 3 {
        return Ok(vec![PredictionInterval::full(); ladder.len()]);
    }
    let fit = gauss_fit(history, x_new)?;
    ladder
        .levels()
        .iter()
        .map(|&eps| {
            if fit.sigma_hat == T::zero() {
                // Exact fit: the point prediction, widened by rounding only.
                return Ok(PredictionInterval {
                    lower: fit.point_prediction - fit.rounding_floor,
                    upper: fit.point_prediction + fit.rounding_floor,
                });
            }
            let h = half_width(&fit, eps)?;
            Ok(PredictionInterval {
                lower: fit.point_prediction - h,
                upper: fit.point_prediction + h,
            })
        })
        .collect()
}

/// `|y - ŷ| / (√(1 + h) σ̂)`.
pub fn gauss_score<T: Scalar>(fit: &GaussFit<T>, y: T) -> Result<T> {
    let scale = fit.prediction_scale();
    if scale == T::zero() {
        return Err(Error::DegenerateFit);
    }
    Ok((y - fit.point_prediction).abs() / scale)
}

/// The same score computed only from the summary `(Z'Z, Z'y, y'y)` of the
/// past observations.
pub fn gauss_score_from_summary<T: Scalar>(summary: &LinearSummary<T>, obs: &Observation<T>) -> Result<T> {
    let k = summary.dim();
    let l = summary.count();
    if obs.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, found: obs.dim() });
    }
    if l < k + 2 {
        return Err(Error::InsufficientData { needed: k + 2, have: l });
    }
    let normal = factor_full_rank(summary.gram())?;
    let gamma = normal.solve(summary.cross());
    let rss = (summary.square_sum() - dot(&gamma, summary.cross())).max(T::zero());
    let sigma2 = rss / T::from_count(l - k - 1);
    let z = obs.design_row();
    let scale = ((T::one() + normal.inverse_quadratic_form(&z)) * sigma2).sqrt();
    if scale == T::zero() {
        return Err(Error::DegenerateFit);
    }
    Ok((obs.response - dot(&gamma, &z)).abs() / scale)
}

/// Conformal p-value of the new observation under the t pivot.
pub fn gauss_p_value<T: Scalar>(history: &History<T>, obs: &Observation<T>, tau: T) -> Result<T> {
    let n = history.len() + 1;
    if n < history.dim() + 3 {
        return Ok(tau);
    }
    let fit = gauss_fit(history, &obs.explanatory)?;
    match gauss_score(&fit, obs.response) {
        Ok(score) => Ok(StudentT::new(fit.degrees_of_freedom)?.two_sided_tail(score)),
        Err(Error::DegenerateFit) => {
            Ok(if (obs.response - fit.point_prediction).abs() <= fit.rounding_floor { T::one() } else { T::zero() })
        }
        Err(e) => Err(e),
    }
}

/// The Gauss predictor; it takes no ridge or feature schedule.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussPredictor;

impl<T: Scalar> ConfidencePredictor<T> for GaussPredictor {
    fn name(&self) -> &str {
        "gauss"
    }

    fn predict(&self, history: &History<T>, x_new: &[T], ladder: &EpsilonLadder<T>, _tau: T)
        -> Result<Vec<PredictionInterval<T>>> {
        gauss_predict(history, x_new, ladder)
    }

    fn p_value(&self, history: &History<T>, obs: &Observation<T>, tau: T) -> Result<Option<T>> {
        gauss_p_value(history, obs, tau).map(Some)
    }
}
