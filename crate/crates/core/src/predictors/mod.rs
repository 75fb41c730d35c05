//! Confidence predictors and the data types they share.
//!
//! Every predictor maps a [`History`] of `n - 1` observations, a new
//! explanatory vector and an [`EpsilonLadder`] to one [`PredictionInterval`]
//! per level. Intervals are convex hulls of the underlying prediction
//! regions and are nested across the ladder.

pub mod gauss;
pub mod iid;
pub mod iidgauss;
pub mod mva;
pub mod wilks;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RidgeProjector};
use crate::Scalar;

pub use gauss::GaussPredictor;
pub use iid::IidPredictor;
pub use iidgauss::{IidGaussPredictor, MonteCarloConfig};
pub use mva::MvaPredictor;

/// One explanatory vector and its response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub explanatory: Vec<T>,
    pub response: T,
}

impl<T: Scalar> Observation<T> {
    pub fn new(explanatory: Vec<T>, response: T) -> Self {
        Self {
            explanatory,
            response,
        }
    }

    pub fn dim(&self) -> usize {
        self.explanatory.len()
    }

    /// The design row `(1, x)`.
    pub fn design_row(&self) -> Vec<T> {
        design_row(&self.explanatory)
    }

    fn is_finite(&self) -> bool {
        self.response.is_finite() && self.explanatory.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn design_row<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut z = Vec::with_capacity(x.len() + 1);
    z.push(T::one());
    z.extend_from_slice(x);
    z
}

/// Sufficient linear summary of a sample: `Z'Z`, `Z'y`, `y'y` and the count.
///
/// `Z'Z` carries the count, `sum x` and `sum x x'`; `Z'y` carries `sum y` and
/// `sum y x`. It is updated one observation at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSummary<T> {
    count: usize,
    gram: Matrix<T>,
    cross: Vec<T>,
    square_sum: T,
}

impl<T: Scalar> LinearSummary<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            gram: Matrix::zeros(dim + 1, dim + 1),
            cross: vec![T::zero(); dim + 1],
            square_sum: T::zero(),
        }
    }

    pub fn from_observations(dim: usize, observations: &[Observation<T>]) -> Result<Self> {
        let mut s = Self::new(dim);
        for obs in observations {
            s.update(obs)?;
        }
        Ok(s)
    }

    pub fn update(&mut self, obs: &Observation<T>) -> Result<()> {
        if obs.dim() + 1 != self.cross.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: obs.dim(),
            });
        }
        let z = obs.design_row();
        self.gram.add_outer(&z, T::one());
        for (c, zi) in self.cross.iter_mut().zip(&z) {
            *c = *c + *zi * obs.response;
        }
        self.square_sum = self.square_sum + obs.response * obs.response;
        self.count += 1;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.cross.len() - 1
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `Z'Z`.
    pub fn gram(&self) -> &Matrix<T> {
        &self.gram
    }

    /// `Z'y`.
    pub fn cross(&self) -> &[T] {
        &self.cross
    }

    /// `y'y`.
    pub fn square_sum(&self) -> T {
        self.square_sum
    }
}

/// Ordered prefix of a stream with the design rows `z_i = (1, x_i)` and the
/// running linear summary cached alongside.
#[derive(Debug, Clone)]
pub struct History<T> {
    dim: usize,
    observations: Vec<Observation<T>>,
    design_rows: Vec<Vec<T>>,
    summary: LinearSummary<T>,
}

impl<T: Scalar> History<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            observations: Vec::new(),
            design_rows: Vec::new(),
            summary: LinearSummary::new(dim),
        }
    }

    pub fn from_observations(dim: usize, observations: impl IntoIterator<Item = Observation<T>>) -> Result<Self> {
        let mut h = Self::new(dim);
        for obs in observations {
            h.push(obs)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, obs: Observation<T>) -> Result<()> {
        self.check_dim(&obs.explanatory)?;
        if !obs.is_finite() {
            return Err(Error::InvalidArgument("observations must be finite".into()));
        }
        self.summary.update(&obs)?;
        self.design_rows.push(obs.design_row());
        self.observations.push(obs);
        Ok(())
    }

    pub(crate) fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Number of explanatory variables `K`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation<T>] {
        &self.observations
    }

    pub fn design_rows(&self) -> &[Vec<T>] {
        &self.design_rows
    }

    pub fn responses(&self) -> Vec<T> {
        self.observations.iter().map(|o| o.response).collect()
    }

    pub fn summary(&self) -> &LinearSummary<T> {
        &self.summary
    }

    /// Ridge projector over the first `columns` design columns of the
    /// history rows followed by the row of `x_new`.
    pub(crate) fn extended_projector(&self, x_new: &[T], columns: usize, ridge: T) -> Result<RidgeProjector<T>> {
        let n = self.len() + 1;
        let z_new = design_row(x_new);
        let mut data = Vec::with_capacity(n * columns);
        for row in &self.design_rows {
            data.extend_from_slice(&row[..columns]);
        }
        data.extend_from_slice(&z_new[..columns]);
        let design = Matrix::from_row_major(n, columns, data)?;
        let mut gram = self.summary.gram().leading_block(columns);
        gram.add_outer(&z_new[..columns], T::one());
        RidgeProjector::with_gram(design, ridge, gram)
    }
}

/// Convex hull of a prediction region. `(+inf, -inf)` encodes the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> PredictionInterval<T> {
    pub fn new(lower: T, upper: T) -> Result<Self> {
        let empty = lower == T::infinity() && upper == T::neg_infinity();
        if lower.is_nan() || upper.is_nan() || (lower > upper && !empty) {
            return Err(Error::InvalidArgument(format!(
                "invalid interval [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn full() -> Self {
        Self {
            lower: T::neg_infinity(),
            upper: T::infinity(),
        }
    }

    pub fn empty() -> Self {
        Self {
            lower: T::infinity(),
            upper: T::neg_infinity(),
        }
    }

    pub fn point(y: T) -> Self {
        Self { lower: y, upper: y }
    }

    pub fn is_empty(&self) -> bool {
        self.lower > self.upper
    }

    pub fn is_full(&self) -> bool {
        self.lower == T::neg_infinity() && self.upper == T::infinity()
    }

    pub fn is_bounded(&self) -> bool {
        self.is_empty() || (self.lower.is_finite() && self.upper.is_finite())
    }

    /// `sup - inf`; zero for the empty set.
    pub fn length(&self) -> T {
        if self.is_empty() {
            T::zero()
        } else {
            self.upper - self.lower
        }
    }

    /// Membership, endpoints included.
    pub fn contains(&self, y: T) -> bool {
        self.lower <= y && y <= self.upper
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.is_empty() || (other.lower <= self.lower && self.upper <= other.upper)
    }

    pub fn hull(&self, other: &Self) -> Self {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Self {
            lower: self.lower.min(other.lower),
            upper: self.upper.max(other.upper),
        }
    }
}

/// Strictly decreasing significance levels in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonLadder<T> {
    levels: Vec<T>,
}

impl<T: Scalar> EpsilonLadder<T> {
    pub fn new(levels: Vec<T>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("at least one significance level is required".into()));
        }
        if let Some(bad) = levels.iter().find(|e| !(**e > T::zero() && **e < T::one())) {
            return Err(Error::InvalidArgument(format!(
                "significance level {bad} is outside (0, 1)"
            )));
        }
        if levels.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidArgument(
                "significance levels must be strictly decreasing".into(),
            ));
        }
        Ok(Self { levels })
    }

    /// Sorts into decreasing order; duplicates are rejected.
    pub fn from_unsorted(mut levels: Vec<T>) -> Result<Self> {
        levels.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        if levels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate significance level".into()));
        }
        Self::new(levels)
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// How many leading explanatory variables enter the ridge design at step
/// `n`: `early_count` before `switch_step`, `full_count` from it on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchedule {
    pub early_count: usize,
    pub switch_step: usize,
    pub full_count: usize,
}

impl FeatureSchedule {
    pub fn new(early_count: usize, switch_step: usize, full_count: usize) -> Result<Self> {
        if early_count > full_count || switch_step == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid feature schedule {early_count}:{switch_step}:{full_count}"
            )));
        }
        Ok(Self {
            early_count,
            switch_step,
            full_count,
        })
    }

    /// All `k` variables at every step.
    pub fn all(k: usize) -> Self {
        Self {
            early_count: k,
            switch_step: 1,
            full_count: k,
        }
    }

    /// Ten leading variables until the classical interval can become
    /// bounded at `n = K + 3`, then all of them.
    pub fn experiment_default(k: usize) -> Self {
        Self {
            early_count: k.min(10),
            switch_step: k + 3,
            full_count: k,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.full_count > k {
            return Err(Error::InvalidArgument(format!(
                "feature schedule uses {} variables but the data has {k}",
                self.full_count
            )));
        }
        Ok(())
    }

    /// Number of variables `K†` used at step `n`.
    pub fn count_at(&self, n: usize) -> usize {
        if n < self.switch_step {
            self.early_count
        } else {
            self.full_count
        }
    }
}

impl std::str::FromStr for FeatureSchedule {
    type Err = Error;

    /// `early:switch:full`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || Error::InvalidArgument(format!("schedule must be early:switch:full, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums: std::result::Result<Vec<usize>, _> = parts.iter().map(|p| p.parse()).collect();
        let nums = nums.map_err(|_| bad())?;
        Self::new(nums[0], nums[1], nums[2])
    }
}

/// A confidence predictor usable in the on-line protocol.
pub trait ConfidencePredictor<T: Scalar>: Sync {
    fn name(&self) -> &str;

    /// Intervals for `x_new` at every level, given the history. `tau` is the
    /// smoothing draw; deterministic predictors pass `1`.
    fn predict(&self, history: &History<T>, x_new: &[T], ladder: &EpsilonLadder<T>, tau: T)
        -> Result<Vec<PredictionInterval<T>>>;

    /// Realized p-value of `obs` given the history, when the predictor has one.
    fn p_value(&self, history: &History<T>, obs: &Observation<T>, tau: T) -> Result<Option<T>>;
}

/// Always outputs the whole line.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullLinePredictor;

impl<T: Scalar> ConfidencePredictor<T> for FullLinePredictor {
    fn name(&self) -> &str {
        "full-line"
    }

    fn predict(&self, _: &History<T>, _: &[T], ladder: &EpsilonLadder<T>, _: T) -> Result<Vec<PredictionInterval<T>>> {
        Ok(vec![PredictionInterval::full(); ladder.len()])
    }

    fn p_value(&self, _: &History<T>, _: &Observation<T>, tau: T) -> Result<Option<T>> {
        Ok(Some(tau))
    }
}

/// Always outputs the empty set.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyPredictor;

impl<T: Scalar> ConfidencePredictor<T> for EmptyPredictor {
    fn name(&self) -> &str {
        "empty"
    }

    fn predict(&self, _: &History<T>, _: &[T], ladder: &EpsilonLadder<T>, _: T) -> Result<Vec<PredictionInterval<T>>> {
        Ok(vec![PredictionInterval::empty(); ladder.len()])
    }

    fn p_value(&self, _: &History<T>, _: &Observation<T>, _: T) -> Result<Option<T>> {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_encodings() {
        let e = PredictionInterval::<f64>::empty();
        assert!(e.is_empty() && e.is_bounded());
        assert_eq!(e.length(), 0.0);
        assert!(!e.contains(0.0));
        let f = PredictionInterval::<f64>::full();
        assert_eq!(f.length(), f64::INFINITY);
        assert!(f.contains(1e300));
        assert!(e.is_subset_of(&f));
        assert!(PredictionInterval::new(2.0, 1.0).is_err());
        assert!(PredictionInterval::new(f64::INFINITY, f64::NEG_INFINITY).unwrap().is_empty());
        let p = PredictionInterval::point(3.0);
        assert!(p.contains(3.0) && p.length() == 0.0);
    }

    #[test]
    fn ladder_validation() {
        assert!(EpsilonLadder::new(vec![0.05, 0.01]).is_ok());
        assert!(EpsilonLadder::new(vec![0.01, 0.05]).is_err());
        assert!(EpsilonLadder::new(vec![0.05, 1.0]).is_err());
        let l = EpsilonLadder::from_unsorted(vec![0.01, 0.2, 0.05]).unwrap();
        assert_eq!(l.levels(), &[0.2, 0.05, 0.01]);
        assert!(EpsilonLadder::from_unsorted(vec![0.05, 0.05]).is_err());
    }

    #[test]
    fn schedule_switches() {
        let s = FeatureSchedule::experiment_default(100);
        assert_eq!((s.count_at(1), s.count_at(102), s.count_at(103)), (10, 10, 100));
        assert_eq!("10:103:100".parse::<FeatureSchedule>().unwrap(), s);
        assert!("3:5".parse::<FeatureSchedule>().is_err());
        assert!(FeatureSchedule::new(5, 3, 2).is_err());
        assert!(s.validate(50).is_err());
        assert_eq!(FeatureSchedule::experiment_default(3).count_at(1), 3);
    }

    #[test]
    fn history_caches_design_rows_and_summary() {
        let mut h = History::new(2);
        h.push(Observation::new(vec![1.0, 2.0], 3.0)).unwrap();
        h.push(Observation::new(vec![-1.0, 0.5], 1.0)).unwrap();
        assert_eq!(h.design_rows()[1], vec![1.0, -1.0, 0.5]);
        assert_eq!(h.summary().count(), 2);
        assert_eq!(h.summary().cross(), &[4.0, 2.0, 6.5]);
        assert_eq!(h.summary().square_sum(), 10.0);
        assert!(matches!(
            h.push(Observation::new(vec![1.0], 0.0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(h.push(Observation::new(vec![f64::NAN, 0.0], 0.0)).is_err());
    }
}
