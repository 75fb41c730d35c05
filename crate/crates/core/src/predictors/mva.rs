//! Conformal predictor for the model with Gaussian explanatory vectors.
//!
//! The residuals of the ridge fit to all `n` observations are affine in the
//! candidate response `y`. After centering by the mean of the first `n - 1`
//! components they give vectors `a`, `b`, and the prediction region is the
//! solution set of `A y² + 2 B y + C < 0` with
//!
//! ```text
//! A = (n-1)(n-2) b_n² - t² n Σ_{i<n} b_i²
//! B = (n-1)(n-2) a_n b_n - t² n Σ_{i<n} a_i b_i
//! C = (n-1)(n-2) a_n² - t² n Σ_{i<n} a_i²
//! ```
//!
//! and `t = t_{n-2}^{ε/2}`.

use crate::error::{Error, Result};
use crate::numerics::linalg::{dot, factor_full_rank, Cholesky, Matrix};
use crate::numerics::{ResidualDecomposition, StudentT};
use crate::predictors::{
    ConfidencePredictor, EpsilonLadder, FeatureSchedule, History, LinearSummary, Observation, PredictionInterval,
};
use crate::Scalar;

/// Shape of `{y : A y² + 2 B y + C < 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Whole,
    TwoRays,
    LeftRay,
    RightRay,
    Interval,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRegion<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub discriminant: T,
}

impl<T: Scalar> QuadraticRegion<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self {
            a,
            b,
            c,
            discriminant: b * b - a * c,
        }
    }

    pub fn contains(&self, y: T) -> bool {
        self.a * y * y + T::lit(2.0) * self.b * y + self.c < T::zero()
    }

    pub fn kind(&self) -> RegionKind {
        let zero = T::zero();
        let (a, b, c, mut d) = (self.a, self.b, self.c, self.discriminant);
        let tiny = T::lit(64.0) * T::epsilon();
        if d.abs() <= tiny * tiny * (b * b + (a * c).abs()) {
            d = zero;
        }
        if a < zero {
            if d > zero {
                RegionKind::TwoRays
            } else {
                // Everything except possibly the double root.
                RegionKind::Whole
            }
        } else if a == zero {
            if b > zero {
                RegionKind::LeftRay
            } else if b < zero {
                RegionKind::RightRay
            } else if c < zero {
                RegionKind::Whole
            } else {
                RegionKind::Empty
            }
        } else if d <= zero {
            RegionKind::Empty
        } else {
            RegionKind::Interval
        }
    }

    /// Convex hull of the region.
    pub fn hull(&self) -> PredictionInterval<T> {
        match self.kind() {
            RegionKind::Whole | RegionKind::TwoRays => PredictionInterval::full(),
            RegionKind::Empty => PredictionInterval::empty(),
            RegionKind::LeftRay => PredictionInterval {
                lower: T::neg_infinity(),
                upper: -self.c / (T::lit(2.0) * self.b),
            },
            RegionKind::RightRay => PredictionInterval {
                lower: -self.c / (T::lit(2.0) * self.b),
                upper: T::infinity(),
            },
            RegionKind::Interval => {
                let root = self.discriminant.sqrt();
                let r1 = (-self.b - root) / self.a;
                let r2 = (-self.b + root) / self.a;
                PredictionInterval {
                    lower: r1.min(r2),
                    upper: r1.max(r2),
                }
            }
        }
    }
}

/// Centers offset and slope by the mean of their first `n - 1` components.
pub fn centered<T: Scalar>(decomposition: &ResidualDecomposition<T>) -> (Vec<T>, Vec<T>) {
    let n = decomposition.len();
    let m = T::from_count(n - 1);
    let mean_a = decomposition.offset[..n - 1].iter().copied().sum::<T>() / m;
    let mean_b = decomposition.slope[..n - 1].iter().copied().sum::<T>() / m;
    (
        decomposition.offset.iter().map(|&v| v - mean_a).collect(),
        decomposition.slope.iter().map(|&v| v - mean_b).collect(),
    )
}

/// Quadratic coefficients for critical value `t`; `None` when the first
/// `n - 1` centered residuals vanish for every `y`.
pub fn quadratic_region<T: Scalar>(a: &[T], b: &[T], t: T) -> Option<QuadraticRegion<T>> {
    let n = a.len();
    let (head_a, head_b) = (&a[..n - 1], &b[..n - 1]);
    let saa = dot(head_a, head_a);
    let sbb = dot(head_b, head_b);
    if saa == T::zero() && sbb == T::zero() {
        return None;
    }
    let sab = dot(head_a, head_b);
    let w = T::from_count((n - 1) * (n - 2));
    let s = t * t * T::from_count(n);
    let (an, bn) = (a[n - 1], b[n - 1]);
    // B² - AC = w s Σ (a_n b_i - b_n a_i)² - s² (S_aa S_bb - S_ab²), with the
    // Gram determinant taken as S_aa |b - (S_ab / S_aa) a|².
    let cross = head_a
        .iter()
        .zip(head_b)
        .fold(T::zero(), |acc, (&ai, &bi)| acc + (an * bi - bn * ai).powi(2));
    let gram_det = if saa == T::zero() {
        T::zero()
    } else {
        let r = sab / saa;
        saa * head_a
            .iter()
            .zip(head_b)
            .fold(T::zero(), |acc, (&ai, &bi)| acc + (bi - r * ai).powi(2))
    };
    Some(QuadraticRegion {
        a: w * bn * bn - s * sbb,
        b: w * an * bn - s * sab,
        c: w * an * an - s * saa,
        discriminant: w * s * cross - s * s * gram_det,
    })
}

pub fn mva_predict<T: Scalar>(
    history: &History<T>,
    x_new: &[T],
    ladder: &EpsilonLadder<T>,
    ridge: T,
    schedule: &FeatureSchedule,
) -> Result<Vec<PredictionInterval<T>>> {
    history.check_dim(x_new)?;
    schedule.validate(history.dim())?;
    let n = history.len() + 1;
    if n < 3 {
        return Ok(vec![PredictionInterval::full(); ladder.len()]);
    }
    let columns = schedule.count_at(n) + 1;
    let projector = history.extended_projector(x_new, columns, ridge)?;
    let decomposition = projector.residual_decomposition(&history.responses())?;
    let (a, b) = centered(&decomposition);
    let dist = StudentT::new((n - 2) as u64)?;
    ladder
        .levels()
        .iter()
        .map(|&eps| {
            let t = dist.upper_point(eps / T::lit(2.0))?;
            Ok(quadratic_region(&a, &b, t).map_or_else(PredictionInterval::full, |q| q.hull()))
        })
        .collect()
}

/// `(e_n - ē_{n-1}) / √(Σ_{i<n} (e_i - ē_{n-1})²)` for a full residual vector.
pub fn mva_score<T: Scalar>(residuals: &[T]) -> Result<T> {
    let n = residuals.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, have: n });
    }
    let head = &residuals[..n - 1];
    let mean = head.iter().copied().sum::<T>() / T::from_count(n - 1);
    let spread: T = head.iter().map(|&e| (e - mean) * (e - mean)).sum();
    if spread == T::zero() {
        return Err(Error::DegenerateFit);
    }
    Ok((residuals[n - 1] - mean) / spread.sqrt())
}

/// The t statistic `√((n-1)/n) (e_n - ē) / √(Σ(e_i - ē)² / (n-2))`.
pub fn mva_statistic<T: Scalar>(score: T, n: usize) -> T {
    let nf = T::from_count(n);
    (T::from_count(n - 1) / nf).sqrt() * score * T::from_count(n - 2).sqrt()
}

/// [`mva_score`] computed from the summary of the first `n - 1` observations
/// and the new one, using the leading `k_dagger` variables.
pub fn mva_score_from_summary<T: Scalar>(
    summary: &LinearSummary<T>,
    obs: &Observation<T>,
    ridge: T,
    k_dagger: usize,
) -> Result<T> {
    if obs.dim() != summary.dim() {
        return Err(Error::DimensionMismatch {
            expected: summary.dim(),
            found: obs.dim(),
        });
    }
    let n = summary.count() + 1;
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, have: n });
    }
    let p = k_dagger + 1;
    let z = obs.design_row();
    let u_new = &z[..p];
    // Past sums restricted to the leading columns.
    let past_gram: Matrix<T> = summary.gram().leading_block(p);
    let past_cross = &summary.cross()[..p];
    let past_u_sum: Vec<T> = (0..p).map(|j| summary.gram()[(0, j)]).collect();
    let past_y_sum = summary.cross()[0];

    let mut normal = past_gram.clone();
    normal.add_outer(u_new, T::one());
    let factor = if ridge == T::zero() {
        factor_full_rank(&normal)?
    } else {
        for i in 0..p {
            normal[(i, i)] = normal[(i, i)] + ridge;
        }
        Cholesky::new(&normal).ok_or(Error::RankDeficient { dim: p, rcond: 0.0 })?
    };
    let rhs: Vec<T> = past_cross
        .iter()
        .zip(u_new)
        .map(|(&c, &u)| c + u * obs.response)
        .collect();
    let coef = factor.solve(&rhs);

    let m = T::from_count(n - 1);
    let e_new = obs.response - dot(u_new, &coef);
    let e_sum = past_y_sum - dot(&past_u_sum, &coef);
    let gc = past_gram.mul_vec(&coef);
    let e_sq = summary.square_sum() - T::lit(2.0) * dot(&coef, past_cross) + dot(&coef, &gc);
    let mean = e_sum / m;
    let spread = (e_sq - m * mean * mean).max(T::zero());
    if spread == T::zero() {
        return Err(Error::DegenerateFit);
    }
    Ok((e_new - mean) / spread.sqrt())
}

/// Conformal p-value `P(|T_{n-2}| >= |statistic|)`; `tau` below the
/// informative threshold, `1` when the spread degenerates.
pub fn mva_p_value<T: Scalar>(
    history: &History<T>,
    obs: &Observation<T>,
    tau: T,
    ridge: T,
    schedule: &FeatureSchedule,
) -> Result<T> {
    let n = history.len() + 1;
    if n < 3 {
        return Ok(tau);
    }
    let columns = schedule.count_at(n) + 1;
    let projector = history.extended_projector(&obs.explanatory, columns, ridge)?;
    let mut y = history.responses();
    y.push(obs.response);
    let e = projector.ridge_residuals(&y)?;
    match mva_score(&e) {
        Ok(score) => Ok(StudentT::new((n - 2) as u64)?.two_sided_tail(mva_statistic(score, n))),
        Err(Error::DegenerateFit) => Ok(T::one()),
        Err(err) => Err(err),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MvaPredictor<T> {
    pub ridge: T,
    pub schedule: FeatureSchedule,
}

impl<T: Scalar> ConfidencePredictor<T> for MvaPredictor<T> {
    fn name(&self) -> &str {
        "mva"
    }

    fn predict(&self, history: &History<T>, x_new: &[T], ladder: &EpsilonLadder<T>, _tau: T)
        -> Result<Vec<PredictionInterval<T>>> {
        mva_predict(history, x_new, ladder, self.ridge, &self.schedule)
    }

    fn p_value(&self, history: &History<T>, obs: &Observation<T>, tau: T) -> Result<Option<T>> {
        mva_p_value(history, obs, tau, self.ridge, &self.schedule).map(Some)
    }
}
