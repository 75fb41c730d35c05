//! Conformal predictor of the IID model with the ridge-residual score
//! `|e_n|`.
//!
//! The residuals of the ridge fit to all `n` observations are `a + y b`
//! for a candidate response `y`. Observation `i` counts towards the p-value
//! on `S_i = {y : |a_i + b_i y| >= |a_n + b_n y|}`, which is an interval, a
//! ray, two rays, a point, the line or empty. A sweep over the endpoints of
//! the `S_i` (the critical points) yields the convex hull of the prediction
//! region in `O(n log n)`.

use std::cmp::Ordering;

use crate::error::Result;
use crate::numerics::{ResidualDecomposition, RidgeProjector};
use crate::predictors::{ConfidencePredictor, EpsilonLadder, FeatureSchedule, History, Observation, PredictionInterval};
use crate::Scalar;

/// `(|{i : α_i > α_n}| + τ |{i : α_i = α_n}|) / n`.
pub fn iid_pvalue<T: Scalar>(scores: &[T], tau: T) -> T {
    let n = scores.len();
    assert!(n > 0, "p-value of an empty score vector");
    let last = scores[n - 1];
    let greater = scores.iter().filter(|&&s| s > last).count();
    let equal = scores.iter().filter(|&&s| s == last).count();
    (T::from_count(greater) + tau * T::from_count(equal)) / T::from_count(n)
}

/// `|e_n|` for the ridge residuals of the full response vector.
pub fn iid_score<T: Scalar>(projector: &RidgeProjector<T>, full_responses: &[T]) -> Result<T> {
    let e = projector.ridge_residuals(full_responses)?;
    Ok(e[e.len() - 1].abs())
}

/// Critical points and per-point count changes of the sweep.
///
/// `critical_points` and `deltas` hold the finite points with their changes
/// in the count `M(y)` of `i < n` with `y ∈ S_i`; `left_count` and
/// `right_count` count the `S_i` reaching to `-∞` and `+∞`.
#[derive(Debug, Clone)]
pub struct SweepState<T> {
    pub critical_points: Vec<T>,
    pub deltas: Vec<i64>,
    pub left_count: i64,
    pub right_count: i64,
    /// Points where some `|e_i(y)| = |e_n(y)|`, one entry per `i` and point.
    tie_points: Vec<T>,
    /// `i < n` with `|e_i(y)| = |e_n(y)|` for every `y`.
    always_tied: usize,
    n: usize,
}

impl<T: Scalar> SweepState<T> {
    /// Builds the sweep for residuals `offset + y * slope`.
    pub fn new(decomposition: &ResidualDecomposition<T>) -> Self {
        let n = decomposition.len();
        let mut a = decomposition.offset.clone();
        let mut b = decomposition.slope.clone();
        for (ai, bi) in a.iter_mut().zip(b.iter_mut()) {
            if *bi < T::zero() {
                *ai = -*ai;
                *bi = -*bi;
            }
        }
        let (an, bn) = (a[n - 1], b[n - 1]);
        let mut state = Self {
            critical_points: Vec::with_capacity(2 * n),
            deltas: Vec::with_capacity(2 * n),
            left_count: 0,
            right_count: 0,
            tie_points: Vec::with_capacity(2 * n),
            always_tied: 0,
            n,
        };
        let two = T::lit(2.0);
        for i in 0..n - 1 {
            let (ai, bi) = (a[i], b[i]);
            if bi != bn {
                let p1 = -(ai - an) / (bi - bn);
                let p2 = -(ai + an) / (bi + bn);
                let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
                if bi < bn {
                    // S_i = [lo, hi], possibly a single point.
                    state.push(lo, 1);
                    state.push(hi, -1);
                } else if lo < hi {
                    // Two rays (-∞, lo] ∪ [hi, ∞).
                    state.push(lo, -1);
                    state.push(hi, 1);
                    state.left_count += 1;
                    state.right_count += 1;
                } else {
                    // The rays meet: S_i is the whole line.
                    state.left_count += 1;
                    state.right_count += 1;
                }
                state.tie_points.push(lo);
                if hi != lo {
                    state.tie_points.push(hi);
                }
            } else if ai == an {
                state.left_count += 1;
                state.right_count += 1;
                state.always_tied += 1;
            } else if bn != T::zero() {
                let point = -(ai + an) / (two * bi);
                if ai > an {
                    state.push(point, 1);
                    state.right_count += 1;
                } else {
                    state.push(point, -1);
                    state.left_count += 1;
                }
                state.tie_points.push(point);
            } else if ai.abs() >= an.abs() {
                state.left_count += 1;
                state.right_count += 1;
                if ai.abs() == an.abs() {
                    state.always_tied += 1;
                }
            }
        }
        state
    }

    fn push(&mut self, point: T, delta: i64) {
        self.critical_points.push(point);
        self.deltas.push(delta);
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn exceeds(&self, count: T, epsilon: T) -> bool {
        count / T::from_count(self.n) > epsilon
    }

    /// Sentinel-extended `(P, NM)`, sorted ascending with ties broken by
    /// descending `NM`.
    pub fn sorted_with_sentinels(&self) -> (Vec<T>, Vec<i64>) {
        let mut items: Vec<(T, i64)> = Vec::with_capacity(self.critical_points.len() + 2);
        items.push((T::neg_infinity(), self.left_count + 1));
        items.extend(self.critical_points.iter().copied().zip(self.deltas.iter().copied()));
        items.push((T::infinity(), -self.right_count - 1));
        items.sort_by(|x, y| {
            x.0.partial_cmp(&y.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| y.1.cmp(&x.1))
        });
        items.into_iter().unzip()
    }

    /// Hull of `{y : p(y) > ε}` for the deterministic p-value (`τ = 1`).
    ///
    /// The lower end is `P(i₁)` for the first index whose prefix sum of `NM`
    /// exceeds `εn`; the upper end is `P(i₂)` for the last index whose
    /// preceding prefix sum does, since the `-1` closing the region sits at
    /// the closed right endpoint itself.
    pub fn interval(&self, epsilon: T) -> PredictionInterval<T> {
        let (points, deltas) = self.sorted_with_sentinels();
        let mut prefix = Vec::with_capacity(deltas.len());
        let mut running = 0i64;
        for d in &deltas {
            running += d;
            prefix.push(running);
        }
        let Some(first) = prefix.iter().position(|&c| self.exceeds(T::from_i64(c).unwrap(), epsilon)) else {
            return PredictionInterval::empty();
        };
        let last = (1..prefix.len())
            .rev()
            .find(|&j| self.exceeds(T::from_i64(prefix[j - 1]).unwrap(), epsilon))
            .unwrap_or(first);
        PredictionInterval {
            lower: points[first],
            upper: points[last],
        }
    }

    /// Hull of `{y : p_τ(y) > ε}` for the smoothed p-value, in which each
    /// `i` tied with `n` at `y` (including `n` itself) counts `τ`.
    pub fn smoothed_interval(&self, epsilon: T, tau: T) -> PredictionInterval<T> {
        #[derive(Clone, Copy)]
        struct Group<T> {
            point: T,
            starts: i64,
            ends: i64,
            ties: usize,
        }
        let mut marks: Vec<(T, i64, bool)> = self
            .critical_points
            .iter()
            .zip(&self.deltas)
            .map(|(&p, &d)| (p, d, false))
            .chain(self.tie_points.iter().map(|&p| (p, 0, true)))
            .collect();
        marks.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));
        let mut groups: Vec<Group<T>> = Vec::new();
        for (point, delta, tie) in marks {
            if groups.last().is_none_or(|g| g.point != point) {
                groups.push(Group { point, starts: 0, ends: 0, ties: 0 });
            }
            let g = groups.last_mut().expect("group just pushed");
            if delta > 0 {
                g.starts += delta;
            } else {
                g.ends -= delta;
            }
            if tie {
                g.ties += 1;
            }
        }

        let discount = T::one() - tau;
        let cell_ties = T::from_count(1 + self.always_tied);
        let value = |count: i64, ties: T| T::from_i64(count).unwrap() - discount * ties;
        let qualifies = |count: i64, ties: T| self.exceeds(value(count, ties), epsilon);

        let mut lower = None;
        let mut upper = None;
        let mut cell = self.left_count + 1;
        if qualifies(cell, cell_ties) {
            lower = Some(T::neg_infinity());
            upper = Some(groups.first().map_or(T::infinity(), |g| g.point));
        }
        for (j, g) in groups.iter().enumerate() {
            let at_point = cell + g.starts;
            if qualifies(at_point, cell_ties + T::from_count(g.ties)) {
                lower.get_or_insert(g.point);
                upper = Some(g.point);
            }
            cell = at_point - g.ends;
            if qualifies(cell, cell_ties) {
                lower.get_or_insert(g.point);
                upper = Some(groups.get(j + 1).map_or(T::infinity(), |next| next.point));
            }
        }
        match (lower, upper) {
            (Some(lower), Some(upper)) => PredictionInterval { lower, upper },
            _ => PredictionInterval::empty(),
        }
    }
}

/// Hull of the IID prediction region at every level of the ladder.
///
/// `tau = 1` gives the deterministic predictor; smaller values give the
/// smoothed one.
pub fn iid_predict<T: Scalar>(
    history: &History<T>,
    x_new: &[T],
    ladder: &EpsilonLadder<T>,
    ridge: T,
    schedule: &FeatureSchedule,
    tau: T,
) -> Result<Vec<PredictionInterval<T>>> {
    history.check_dim(x_new)?;
    schedule.validate(history.dim())?;
    if history.is_empty() {
        // Only the new observation: p ≡ τ.
        return Ok(ladder
            .levels()
            .iter()
            .map(|&eps| if tau > eps { PredictionInterval::full() } else { PredictionInterval::empty() })
            .collect());
    }
    let sweep = iid_sweep(history, x_new, ridge, schedule)?;
    Ok(ladder
        .levels()
        .iter()
        .map(|&eps| {
            if tau == T::one() {
                sweep.interval(eps)
            } else {
                sweep.smoothed_interval(eps, tau)
            }
        })
        .collect())
}

/// Residual decomposition for the step `n = history.len() + 1`.
pub fn iid_decomposition<T: Scalar>(
    history: &History<T>,
    x_new: &[T],
    ridge: T,
    schedule: &FeatureSchedule,
) -> Result<ResidualDecomposition<T>> {
    let n = history.len() + 1;
    let projector = history.extended_projector(x_new, schedule.count_at(n) + 1, ridge)?;
    projector.residual_decomposition(&history.responses())
}

pub fn iid_sweep<T: Scalar>(
    history: &History<T>,
    x_new: &[T],
    ridge: T,
    schedule: &FeatureSchedule,
) -> Result<SweepState<T>> {
    Ok(SweepState::new(&iid_decomposition(history, x_new, ridge, schedule)?))
}

/// Realized p-value of `obs`.
pub fn iid_p_value<T: Scalar>(
    history: &History<T>,
    obs: &Observation<T>,
    tau: T,
    ridge: T,
    schedule: &FeatureSchedule,
) -> Result<T> {
    if history.is_empty() {
        return Ok(tau);
    }
    let n = history.len() + 1;
    let projector = history.extended_projector(&obs.explanatory, schedule.count_at(n) + 1, ridge)?;
    let mut y = history.responses();
    y.push(obs.response);
    let scores: Vec<T> = projector.ridge_residuals(&y)?.into_iter().map(|e| e.abs()).collect();
    Ok(iid_pvalue(&scores, tau))
}

#[derive(Debug, Clone, Copy)]
pub struct IidPredictor<T> {
    pub ridge: T,
    pub schedule: FeatureSchedule,
}

impl<T: Scalar> ConfidencePredictor<T> for IidPredictor<T> {
    fn name(&self) -> &str {
        "iid"
    }

    fn predict(&self, history: &History<T>, x_new: &[T], ladder: &EpsilonLadder<T>, tau: T)
        -> Result<Vec<PredictionInterval<T>>> {
        iid_predict(history, x_new, ladder, self.ridge, &self.schedule, tau)
    }

    fn p_value(&self, history: &History<T>, obs: &Observation<T>, tau: T) -> Result<Option<T>> {
        iid_p_value(history, obs, tau, self.ridge, &self.schedule).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn decomposition(offset: Vec<f64>, slope: Vec<f64>) -> ResidualDecomposition<f64> {
        ResidualDecomposition { offset, slope }
    }

    /// Closed count `#{i : |a_i + b_i y| >= |a_n + b_n y|}` with a relative
    /// tolerance so that critical points themselves count as ties.
    fn counts(d: &ResidualDecomposition<f64>, y: f64) -> (usize, usize) {
        let e = d.residuals_at(y);
        let en = e[e.len() - 1].abs();
        let tol = 1e-9 * (1.0 + en);
        let greater = e.iter().filter(|v| v.abs() > en + tol).count();
        let geq = e.iter().filter(|v| v.abs() >= en - tol).count();
        (greater, geq)
    }

    fn brute_force(d: &ResidualDecomposition<f64>, eps: f64, tau: f64) -> PredictionInterval<f64> {
        let n = d.len();
        let mut pts = Vec::new();
        for i in 0..n - 1 {
            let (ai, bi, an, bn) = (d.offset[i], d.slope[i], d.offset[n - 1], d.slope[n - 1]);
            for (num, den) in [(ai - an, bi - bn), (ai + an, bi + bn)] {
                if den != 0.0 {
                    pts.push(-num / den);
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let p = |y: f64| {
            let (g, geq) = counts(d, y);
            (g as f64 + tau * (geq - g) as f64) / n as f64
        };
        let mut candidates: Vec<(f64, f64, f64)> = Vec::new(); // (p, inf, sup)
        match (pts.first(), pts.last()) {
            (Some(&lo), Some(&hi)) => {
                candidates.push((p(lo - 1.0), f64::NEG_INFINITY, lo));
                candidates.push((p(hi + 1.0), hi, f64::INFINITY));
            }
            _ => candidates.push((p(0.0), f64::NEG_INFINITY, f64::INFINITY)),
        }
        for w in pts.windows(2) {
            candidates.push((p(0.5 * (w[0] + w[1])), w[0], w[1]));
        }
        for &pt in &pts {
            candidates.push((p(pt), pt, pt));
        }
        let mut out = PredictionInterval::empty();
        for (pv, lo, hi) in candidates {
            if pv > eps {
                out = out.hull(&PredictionInterval { lower: lo, upper: hi });
            }
        }
        out
    }

    #[test]
    fn interval_set_is_closed() {
        // S_1 = [0, 1]: e_1 = y - 0.5 scaled small, e_2 grows faster.
        // |0.5 - 0.5y|... use explicit a, b: S_1 = {|a1 + b1 y| >= |a2 + b2 y|}.
        let d = decomposition(vec![1.0, -1.0], vec![0.0, 2.0]);
        // |1| >= |2y - 1|  <=>  y in [0, 1].
        let s = SweepState::new(&d);
        assert_eq!(s.interval(0.6), PredictionInterval { lower: 0.0, upper: 1.0 });
        assert!(s.interval(0.4).is_full());
        assert_eq!(s.interval(0.6), brute_force(&d, 0.6, 1.0));
    }

    #[test]
    fn sentinel_sum_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let n = rng.random_range(2..15);
            let d = decomposition(
                (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let s = SweepState::new(&d);
            let (p, nm) = s.sorted_with_sentinels();
            assert_eq!(p.len(), nm.len());
            assert_eq!(nm.iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn prefix_sums_count_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let n = rng.random_range(2..12);
            let d = decomposition(
                (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let (p, nm) = SweepState::new(&d).sorted_with_sentinels();
            let mut running = 0;
            for j in 0..p.len() - 1 {
                running += nm[j];
                if p[j + 1] > p[j] {
                    let y = if p[j].is_finite() && p[j + 1].is_finite() {
                        0.5 * (p[j] + p[j + 1])
                    } else if p[j + 1].is_finite() {
                        p[j + 1] - 1.0
                    } else {
                        p[j] + 1.0
                    };
                    let (_, geq) = counts(&d, y);
                    assert_eq!(running, geq as i64);
                }
            }
        }
    }

    #[test]
    fn sweep_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..300 {
            let n = rng.random_range(2..20);
            let d = decomposition(
                (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let s = SweepState::new(&d);
            for eps in [0.01, 0.05, 0.1, 0.2, 0.35] {
                let got = s.interval(eps);
                let want = brute_force(&d, eps, 1.0);
                assert_eq!(got, want, "n={n} eps={eps}");
                let tau = rng.random_range(0.0..1.0);
                assert_eq!(s.smoothed_interval(eps, tau), brute_force(&d, eps, tau), "tau={tau}");
                assert_eq!(s.smoothed_interval(eps, 1.0), got);
            }
        }
    }

    #[test]
    fn degenerate_slopes_use_fallback_branches() {
        // All slopes zero: S_i is R or empty.
        let d = decomposition(vec![3.0, 1.0, -2.0, 2.0], vec![0.0; 4]);
        let s = SweepState::new(&d);
        assert!(s.critical_points.is_empty());
        assert_eq!((s.left_count, s.right_count), (2, 2));
        // p = 3/4 everywhere (i = 1, 3 and n itself).
        assert!(s.interval(0.7).is_full());
        assert!(s.interval(0.75).is_empty());
        // Equal slopes: a ray per observation.
        let d = decomposition(vec![3.0, -1.0, 0.5], vec![1.0, 1.0, 1.0]);
        let s = SweepState::new(&d);
        assert_eq!(s.critical_points.len(), 2);
        for eps in [0.2, 0.4, 0.7] {
            assert_eq!(s.interval(eps), brute_force(&d, eps, 1.0));
        }
        // Identical residual functions always tie.
        let d = decomposition(vec![0.5, 0.5], vec![1.0, 1.0]);
        let s = SweepState::new(&d);
        assert!(s.interval(0.9).is_full());
        assert!(s.smoothed_interval(0.5, 0.4).is_empty());
    }

    #[test]
    fn coincident_critical_points_both_added() {
        // b_1 < b_n with a_1 = 0 and a_n = 0: both points (22) equal 0.
        let d = decomposition(vec![0.0, 0.0], vec![0.5, 1.0]);
        let s = SweepState::new(&d);
        assert_eq!(s.critical_points, vec![0.0, 0.0]);
        assert_eq!(s.interval(0.6), PredictionInterval::point(0.0));
    }

    #[test]
    fn pvalue_examples() {
        assert_eq!(iid_pvalue(&[3.0], 1.0), 1.0);
        assert_eq!(iid_pvalue(&[1.0, 2.0, 0.5, 9.0], 1.0), 0.25);
        assert!((iid_pvalue(&[2.0f64; 10], 0.3) - 0.3).abs() < 1e-15);
    }

    fn random_history(rng: &mut ChaCha8Rng, n: usize, k: usize) -> History<f64> {
        History::from_observations(
            k,
            (0..n).map(|_| {
                let x: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y = x.iter().sum::<f64>() + rng.random_range(-1.0..1.0);
                Observation::new(x, y)
            }),
        )
        .unwrap()
    }

    #[test]
    fn empty_history_gives_full_line() {
        let h = History::<f64>::new(2);
        let out = iid_predict(&h, &[0.0, 1.0], &EpsilonLadder::new(vec![0.5, 0.05]).unwrap(), 0.0, &FeatureSchedule::all(2), 1.0).unwrap();
        assert!(out.iter().all(|i| i.is_full()));
    }

    #[test]
    fn unbounded_below_inverse_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let eps = 0.1;
        for n in 2..10 {
            let h = random_history(&mut rng, n - 1, 2);
            let out = iid_predict(&h, &[0.1, 0.2], &EpsilonLadder::new(vec![eps]).unwrap(), 0.01, &FeatureSchedule::all(2), 1.0).unwrap();
            assert!(!out[0].is_bounded(), "n={n}");
        }
    }

    #[test]
    fn score_on_exact_fit_is_zero() {
        let design = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]).unwrap();
        let p = RidgeProjector::new(design, 0.0).unwrap();
        assert!(iid_score(&p, &[1.0, 3.0, 5.0]).unwrap() < 1e-12);
    }

    #[test]
    fn score_invariant_under_permutation_of_history() {
        let design = Matrix::<f64>::from_rows(&[[1.0, 0.3], [1.0, -1.0], [1.0, 2.0], [1.0, 0.7]]).unwrap();
        let swapped = Matrix::<f64>::from_rows(&[[1.0, 2.0], [1.0, 0.3], [1.0, -1.0], [1.0, 0.7]]).unwrap();
        let s1 = iid_score(&RidgeProjector::new(design, 0.01).unwrap(), &[1.0, 2.0, -0.5, 0.4]).unwrap();
        let s2 = iid_score(&RidgeProjector::new(swapped, 0.01).unwrap(), &[-0.5, 1.0, 2.0, 0.4]).unwrap();
        assert!((s1 - s2).abs() < 1e-14);
    }

    #[test]
    fn deterministic_error_implies_smoothed_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let ladder = EpsilonLadder::new(vec![0.2, 0.1]).unwrap();
        let s = FeatureSchedule::all(1);
        for _ in 0..200 {
            let len = rng.random_range(5..30);
            let h = random_history(&mut rng, len, 1);
            let x = [rng.random_range(-2.0..2.0)];
            let y = x[0] + rng.random_range(-2.0..2.0);
            let det = iid_predict(&h, &x, &ladder, 0.01, &s, 1.0).unwrap();
            let tau = rng.random_range(0.0..1.0);
            let smooth = iid_predict(&h, &x, &ladder, 0.01, &s, tau).unwrap();
            for (d, sm) in det.iter().zip(&smooth) {
                assert!(sm.is_subset_of(d));
                if !d.contains(y) {
                    assert!(!sm.contains(y));
                }
            }
        }
    }
}
