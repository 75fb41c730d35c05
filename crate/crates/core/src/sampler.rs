//! Exact sampling from the IID-Gauss conditional distribution given the
//! sufficient summary `(bag of x_i, Σ y_i, Σ y_i x_i, Σ y_i²)`.
//!
//! Given the summary, `Z'Z`, `Z'y` and `y'y` are fixed for every ordering of
//! the bag, so the conditional law is uniform over orderings and, for each
//! ordering `π`, uniform over the sphere
//! `{Z_π G⁻¹c + r : Z_π'r = 0, |r|² = y'y - c'G⁻¹c}`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::linalg::{dot, factor_full_rank, Cholesky, Matrix};
use crate::predictors::{design_row, Observation};
use crate::Scalar;

const DIRECTION_NORM_FLOOR: f64 = 1e-12;
const ENERGY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct IidGaussSummary<T> {
    feature_bag: Vec<Vec<T>>,
    response_sum: T,
    cross_sum: Vec<T>,
    square_sum: T,
}

impl<T: Scalar> IidGaussSummary<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            feature_bag: Vec::new(),
            response_sum: T::zero(),
            cross_sum: vec![T::zero(); dim],
            square_sum: T::zero(),
        }
    }

    pub fn from_observations<'a>(dim: usize, observations: impl IntoIterator<Item = &'a Observation<T>>) -> Result<Self> {
        let mut s = Self::new(dim);
        for obs in observations {
            s.push(obs)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, obs: &Observation<T>) -> Result<()> {
        if obs.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: obs.dim(),
            });
        }
        let y = obs.response;
        self.response_sum = self.response_sum + y;
        for (c, x) in self.cross_sum.iter_mut().zip(&obs.explanatory) {
            *c = *c + y * *x;
        }
        self.square_sum = self.square_sum + y * y;
        self.feature_bag.push(obs.explanatory.clone());
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.cross_sum.len()
    }

    pub fn count(&self) -> usize {
        self.feature_bag.len()
    }

    pub fn feature_bag(&self) -> &[Vec<T>] {
        &self.feature_bag
    }

    pub fn response_sum(&self) -> T {
        self.response_sum
    }

    pub fn cross_sum(&self) -> &[T] {
        &self.cross_sum
    }

    pub fn square_sum(&self) -> T {
        self.square_sum
    }

    /// `c = (Σ y_i, Σ y_i x_i)`, i.e. `Z'y`.
    pub fn cross_vector(&self) -> Vec<T> {
        let mut c = Vec::with_capacity(self.dim() + 1);
        c.push(self.response_sum);
        c.extend_from_slice(&self.cross_sum);
        c
    }

    /// `Z'Z` over the bag.
    pub fn gram(&self) -> Matrix<T> {
        let k = self.dim() + 1;
        let mut g = Matrix::zeros(k, k);
        for x in &self.feature_bag {
            g.add_outer(&design_row(x), T::one());
        }
        g
    }

    /// Largest relative deviation of any component from `other`; bags are
    /// compared as multisets.
    pub fn relative_deviation(&self, other: &Self) -> T {
        let rel = |a: T, b: T| (a - b).abs() / T::one().max(a.abs()).max(b.abs());
        if self.count() != other.count() || self.dim() != other.dim() {
            return T::infinity();
        }
        let mut worst = rel(self.response_sum, other.response_sum).max(rel(self.square_sum, other.square_sum));
        for (a, b) in self.cross_sum.iter().zip(&other.cross_sum) {
            worst = worst.max(rel(*a, *b));
        }
        let mut mine = self.feature_bag.clone();
        let mut theirs = other.feature_bag.clone();
        let order = |a: &Vec<T>, b: &Vec<T>| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal);
        mine.sort_by(order);
        theirs.sort_by(order);
        for (a, b) in mine.iter().zip(&theirs) {
            for (u, v) in a.iter().zip(b) {
                worst = worst.max(rel(*u, *v));
            }
        }
        worst
    }
}

/// The summary with one more observation.
pub fn update_summary<T: Scalar>(summary: &IidGaussSummary<T>, obs: &Observation<T>) -> Result<IidGaussSummary<T>> {
    let mut next = summary.clone();
    next.push(obs)?;
    Ok(next)
}

/// One conditional draw: the bag in the order `ordering` paired with
/// `responses`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSample<T> {
    pub ordering: Vec<usize>,
    pub responses: Vec<T>,
}

impl<T: Scalar> ConditionalSample<T> {
    /// Summary of the sample, given the bag it was drawn from.
    pub fn summary(&self, bag: &[Vec<T>]) -> IidGaussSummary<T> {
        let dim = bag.first().map_or(0, Vec::len);
        let mut s = IidGaussSummary::new(dim);
        for (&i, &y) in self.ordering.iter().zip(&self.responses) {
            s.push(&Observation::new(bag[i].clone(), y))
                .expect("bag dimensions are consistent");
        }
        s
    }
}

/// Orderings and unit directions shared by the sampler and the Monte-Carlo
/// predictor.
pub(crate) struct SamplerFrame<T> {
    pub rows: Vec<Vec<T>>,
    pub normal: Cholesky<T>,
}

impl<T: Scalar> SamplerFrame<T> {
    pub fn new(bag: &[Vec<T>]) -> Result<Self> {
        let rows: Vec<Vec<T>> = bag.iter().map(|x| design_row(x)).collect();
        let k = rows.first().map_or(1, Vec::len);
        if rows.len() < k + 1 {
            return Err(Error::InsufficientData { needed: k + 1, have: rows.len() });
        }
        let mut gram = Matrix::zeros(k, k);
        for z in &rows {
            gram.add_outer(z, T::one());
        }
        Ok(Self {
            normal: factor_full_rank(&gram)?,
            rows,
        })
    }

    /// Uniform ordering and a uniform unit vector orthogonal to the columns
    /// of the reordered design, from the stream `index` of `seed`.
    pub fn draw(&self, seed: u64, index: u64) -> (Vec<usize>, Vec<T>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let n = self.rows.len();
        let mut ordering: Vec<usize> = (0..n).collect();
        ordering.shuffle(&mut rng);
        loop {
            let g: Vec<T> = (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
            let k = self.normal.dim();
            let mut zg = vec![T::zero(); k];
            for (&i, &gi) in ordering.iter().zip(&g) {
                for (acc, z) in zg.iter_mut().zip(&self.rows[i]) {
                    *acc = *acc + *z * gi;
                }
            }
            let coef = self.normal.solve(&zg);
            let d: Vec<T> = ordering
                .iter()
                .zip(&g)
                .map(|(&i, &gi)| gi - dot(&self.rows[i], &coef))
                .collect();
            let norm = dot(&d, &d).sqrt();
            if norm >= T::lit(DIRECTION_NORM_FLOOR) {
                return (ordering, d.into_iter().map(|v| v / norm).collect());
            }
        }
    }
}

/// `(G⁻¹c, y'y - c'G⁻¹c)`, clamping rounding-level negative energy to zero.
pub(crate) fn projection_and_energy<T: Scalar>(normal: &Cholesky<T>, c: &[T], square_sum: T) -> Result<(Vec<T>, T)> {
    let w = normal.solve(c);
    let energy = square_sum - dot(c, &w);
    if energy >= T::zero() {
        return Ok((w, energy));
    }
    let scale = T::one().max(square_sum.abs());
    if -energy <= T::lit(ENERGY_TOLERANCE) * scale {
        Ok((w, T::zero()))
    } else {
        Err(Error::InconsistentSummary(energy.to_f64().unwrap_or(f64::NAN)))
    }
}

/// `count` independent draws from the conditional distribution given
/// `summary`. Sample `i` uses the stream `i` of `seed`, so the output does
/// not depend on the thread count.
pub fn sample_conditional<T: Scalar>(summary: &IidGaussSummary<T>, count: usize, seed: u64) -> Result<Vec<ConditionalSample<T>>> {
    let needed = summary.dim() + 2;
    if summary.count() < needed {
        return Err(Error::InsufficientData {
            needed,
            have: summary.count(),
        });
    }
    let frame = SamplerFrame::new(summary.feature_bag())?;
    let (w, energy) = projection_and_energy(&frame.normal, &summary.cross_vector(), summary.square_sum())?;
    let radius = energy.sqrt();
    let fitted: Vec<T> = frame.rows.iter().map(|z| dot(z, &w)).collect();
    Ok((0..count as u64)
        .into_par_iter()
        .map(|index| {
            let (ordering, direction) = frame.draw(seed, index);
            let responses = ordering
                .iter()
                .zip(&direction)
                .map(|(&i, &d)| fitted[i] + radius * d)
                .collect();
            ConditionalSample { ordering, responses }
        })
        .collect())
}
