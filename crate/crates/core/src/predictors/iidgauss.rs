//! Monte-Carlo conformal predictor of the IID-Gauss model.
//!
//! The p-value of a candidate `y` is the conditional probability, given the
//! sufficient summary of all `n` observations, that the score `|e_n|` is at
//! least the observed one. It is estimated from `M` conditional draws as
//! `(1 + #{draws at least as strange}) / (M + 1)`.
//!
//! The draws for all candidates share orderings and sphere directions: for
//! a fixed ordering `π` and unit direction `d`, the drawn responses are
//! `Z_π G⁻¹c(y) + √Q(y) d` with `c(y) = c₀ + y z_n` and `Q` quadratic in
//! `y`, so each draw's score reduces to three scalars.

use rayon::prelude::*;

use crate::error::Result;
use crate::numerics::linalg::{dot, factor_full_rank, Cholesky, Matrix};
use crate::predictors::{
    design_row, ConfidencePredictor, EpsilonLadder, FeatureSchedule, History, Observation, PredictionInterval,
};
use crate::sampler::SamplerFrame;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    /// Number of conditional draws `M`.
    pub samples: usize,
    pub seed: u64,
    /// Search bound: a side whose boundary lies beyond `±bound` is reported
    /// as unbounded.
    pub bound: f64,
    pub bisection_steps: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            samples: 999,
            seed: 0x5EED,
            bound: 1e6,
            bisection_steps: 40,
        }
    }
}

impl MonteCarloConfig {
    /// Seed of the draws at step `n`.
    pub fn step_seed(&self, n: usize) -> u64 {
        self.seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

/// Per-draw coefficients of the score `|α₀ + y α₁ + √Q(y) δ|`.
struct DrawScore<T> {
    alpha0: T,
    alpha1: T,
    delta: T,
}

/// Monte-Carlo p-value as a function of the candidate response.
pub struct McPValue<T> {
    /// Observed residual `a_n + y b_n`.
    offset: T,
    slope: T,
    /// `Q(y) = q0 + q1 y + q2 y²`.
    q: [T; 3],
    draws: Vec<DrawScore<T>>,
}

impl<T: Scalar> McPValue<T> {
    fn build(history: &History<T>, x_new: &[T], ridge: T, columns: usize, mc: &MonteCarloConfig) -> Result<Self> {
        let n = history.len() + 1;
        let mut bag: Vec<Vec<T>> = history.observations().iter().map(|o| o.explanatory.clone()).collect();
        bag.push(x_new.to_vec());
        let frame = SamplerFrame::new(&bag)?;
        let summary = history.summary();
        let z_new = design_row(x_new);
        let w0 = frame.normal.solve(summary.cross());
        let w1 = frame.normal.solve(&z_new);
        let q = [
            summary.square_sum() - dot(summary.cross(), &w0),
            -(T::one() + T::one()) * dot(&z_new, &w0),
            T::one() - dot(&z_new, &w1),
        ];

        // Ridge normal matrix of the leading columns, shared by every ordering.
        let mut gram = summary.gram().leading_block(columns);
        gram.add_outer(&z_new[..columns], T::one());
        let ridge_normal = ridge_factor(gram, ridge)?;
        let s0: Vec<T> = frame.rows.iter().map(|z| dot(z, &w0)).collect();
        let s1: Vec<T> = frame.rows.iter().map(|z| dot(z, &w1)).collect();
        let cross = |s: &[T]| {
            let mut acc = vec![T::zero(); columns];
            for (z, &v) in frame.rows.iter().zip(s) {
                for (a, u) in acc.iter_mut().zip(&z[..columns]) {
                    *a = *a + *u * v;
                }
            }
            ridge_normal.solve(&acc)
        };
        let (h0, h1) = (cross(&s0), cross(&s1));

        let observed = {
            let mut fixed = history.responses();
            fixed.push(T::zero());
            let rows: Vec<&[T]> = frame.rows.iter().map(|z| &z[..columns]).collect();
            last_residual_parts(&rows, &ridge_normal, &fixed)
        };

        let seed = mc.step_seed(n);
        let draws = (0..mc.samples as u64)
            .into_par_iter()
            .map(|index| {
                let (ordering, d) = frame.draw(seed, index);
                let last = &frame.rows[ordering[n - 1]][..columns];
                let mut ud = vec![T::zero(); columns];
                for (&i, &di) in ordering.iter().zip(&d) {
                    for (a, u) in ud.iter_mut().zip(&frame.rows[i][..columns]) {
                        *a = *a + *u * di;
                    }
                }
                DrawScore {
                    alpha0: s0[ordering[n - 1]] - dot(last, &h0),
                    alpha1: s1[ordering[n - 1]] - dot(last, &h1),
                    delta: d[n - 1] - dot(last, &ridge_normal.solve(&ud)),
                }
            })
            .collect();
        Ok(Self {
            offset: observed.0,
            slope: observed.1,
            q,
            draws,
        })
    }

    /// `(1 + #{draws with score ≥ observed}) / (M + 1)`.
    pub fn at(&self, y: T) -> T {
        let observed = (self.offset + y * self.slope).abs();
        let radius = (self.q[0] + y * (self.q[1] + y * self.q[2])).max(T::zero()).sqrt();
        let count = self
            .draws
            .iter()
            .filter(|d| (d.alpha0 + y * d.alpha1 + radius * d.delta).abs() >= observed)
            .count();
        T::from_count(1 + count) / T::from_count(1 + self.draws.len())
    }

    /// Point where the observed residual vanishes, so that `p = 1`.
    fn center(&self) -> T {
        if self.slope != T::zero() {
            -self.offset / self.slope
        } else {
            T::zero()
        }
    }
}

fn ridge_factor<T: Scalar>(gram: Matrix<T>, ridge: T) -> Result<Cholesky<T>> {
    if ridge == T::zero() {
        return factor_full_rank(&gram);
    }
    let mut g = gram;
    for i in 0..g.rows() {
        g[(i, i)] = g[(i, i)] + ridge;
    }
    factor_full_rank(&g)
}

/// `(a_n, b_n)` of the last ridge residual `a_n + y b_n` when the last
/// response is `y`.
fn last_residual_parts<T: Scalar>(rows: &[&[T]], normal: &Cholesky<T>, fixed: &[T]) -> (T, T) {
    let n = rows.len();
    let columns = normal.dim();
    let mut uy = vec![T::zero(); columns];
    for (z, &y) in rows.iter().zip(fixed) {
        for (a, u) in uy.iter_mut().zip(z.iter()) {
            *a = *a + *u * y;
        }
    }
    let last = rows[n - 1];
    let offset = fixed[n - 1] - dot(last, &normal.solve(&uy));
    let slope = T::one() - normal.inverse_quadratic_form(last);
    (offset, slope)
}

/// Monte-Carlo p-value function for candidate responses at `x_new`, or
/// `None` below `n = K + 2`.
pub fn iidgauss_p_value_fn<T: Scalar>(
    history: &History<T>,
    x_new: &[T],
    ridge: T,
    schedule: &FeatureSchedule,
    mc: &MonteCarloConfig,
) -> Result<Option<McPValue<T>>> {
    history.check_dim(x_new)?;
    schedule.validate(history.dim())?;
    let n = history.len() + 1;
    if n < history.dim() + 2 {
        return Ok(None);
    }
    McPValue::build(history, x_new, ridge, schedule.count_at(n) + 1, mc).map(Some)
}

/// Hull of `{y : p(y) > ε}`, searched outward from the point of zero
/// observed residual on a geometric bracket and refined by bisection.
pub fn iidgauss_predict<T: Scalar>(
    history: &History<T>,
    x_new: &[T],
    ladder: &EpsilonLadder<T>,
    ridge: T,
    schedule: &FeatureSchedule,
    mc: &MonteCarloConfig,
) -> Result<Vec<PredictionInterval<T>>> {
    let Some(p) = iidgauss_p_value_fn(history, x_new, ridge, schedule, mc)? else {
        return Ok(vec![PredictionInterval::full(); ladder.len()]);
    };
    let center = p.center();
    let bound = T::lit(mc.bound);
    let mut previous = PredictionInterval::empty();
    let mut out = Vec::with_capacity(ladder.len());
    for &eps in ladder.levels() {
        let found = if p.at(center) <= eps {
            PredictionInterval::empty()
        } else {
            PredictionInterval {
                lower: boundary(&p, center, -T::one(), eps, bound, mc.bisection_steps),
                upper: boundary(&p, center, T::one(), eps, bound, mc.bisection_steps),
            }
        };
        previous = previous.hull(&found);
        out.push(previous);
    }
    Ok(out)
}

fn boundary<T: Scalar>(p: &McPValue<T>, center: T, direction: T, eps: T, bound: T, steps: usize) -> T {
    let mut inside = center;
    let mut step = T::one().max(center.abs() * T::lit(1e-3));
    let outside = loop {
        let candidate = center + direction * step;
        if candidate.abs() > bound || !candidate.is_finite() {
            return direction * T::infinity();
        }
        if p.at(candidate) <= eps {
            break candidate;
        }
        inside = candidate;
        step = step + step;
    };
    let (mut lo, mut hi) = (inside, outside);
    for _ in 0..steps {
        let mid = (lo + hi) / (T::one() + T::one());
        if p.at(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Realized Monte-Carlo p-value of `obs`; `None` below `n = K + 2`.
pub fn iidgauss_p_value<T: Scalar>(
    history: &History<T>,
    obs: &Observation<T>,
    ridge: T,
    schedule: &FeatureSchedule,
    mc: &MonteCarloConfig,
) -> Result<Option<T>> {
    Ok(iidgauss_p_value_fn(history, &obs.explanatory, ridge, schedule, mc)?.map(|p| p.at(obs.response)))
}

#[derive(Debug, Clone, Copy)]
pub struct IidGaussPredictor<T> {
    pub ridge: T,
    pub schedule: FeatureSchedule,
    pub monte_carlo: MonteCarloConfig,
}

impl<T: Scalar> ConfidencePredictor<T> for IidGaussPredictor<T> {
    fn name(&self) -> &str {
        "iidgauss"
    }

    fn predict(&self, history: &History<T>, x_new: &[T], ladder: &EpsilonLadder<T>, _tau: T)
        -> Result<Vec<PredictionInterval<T>>> {
        iidgauss_predict(history, x_new, ladder, self.ridge, &self.schedule, &self.monte_carlo)
    }

    fn p_value(&self, history: &History<T>, obs: &Observation<T>, tau: T) -> Result<Option<T>> {
        Ok(Some(iidgauss_p_value(history, obs, self.ridge, &self.schedule, &self.monte_carlo)?.unwrap_or(tau)))
    }
}
