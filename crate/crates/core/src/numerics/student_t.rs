//! Student's t distribution with integer degrees of freedom.
//!
//! The CDF goes through the regularized incomplete beta function
//! `I_x(m/2, 1/2)` with `x = m / (m + t^2)`; quantiles are found by
//! bisection on the upper tail.

use crate::error::{Error, Result};
use crate::Scalar;

/// Absolute tolerance of [`StudentT::upper_point`].
pub const QUANTILE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudentT<T> {
    degrees_of_freedom: u64,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Scalar> StudentT<T> {
    pub fn new(degrees_of_freedom: u64) -> Result<Self> {
        if degrees_of_freedom == 0 {
            return Err(Error::InvalidArgument(
                "t distribution needs at least one degree of freedom".into(),
            ));
        }
        Ok(Self {
            degrees_of_freedom,
            _scalar: std::marker::PhantomData,
        })
    }

    pub fn degrees_of_freedom(&self) -> u64 {
        self.degrees_of_freedom
    }

    fn dof(&self) -> T {
        T::from_u64(self.degrees_of_freedom).expect("degrees of freedom fit the scalar")
    }

    /// `P(|T| >= |t|)`, accurate in the far tail.
    pub fn two_sided_tail(&self, t: T) -> T {
        if t.is_nan() {
            return T::nan();
        }
        if t.is_infinite() {
            return T::zero();
        }
        let m = self.dof();
        let t2 = t * t;
        let denom = m + t2;
        let half = T::lit(0.5);
        regularized_beta(m * half, half, m / denom, t2 / denom)
    }

    /// `P(T > t)`.
    pub fn sf(&self, t: T) -> T {
        let half = T::lit(0.5);
        let tail = half * self.two_sided_tail(t);
        if t >= T::zero() {
            tail
        } else {
            T::one() - tail
        }
    }

    pub fn cdf(&self, t: T) -> T {
        let half = T::lit(0.5);
        let tail = half * self.two_sided_tail(t);
        if t >= T::zero() {
            T::one() - tail
        } else {
            tail
        }
    }

    /// The upper `delta` point: the `t` with `P(T > t) = delta`.
    pub fn upper_point(&self, delta: T) -> Result<T> {
        if !(delta > T::zero() && delta < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "tail probability must lie in (0, 1), got {delta}"
            )));
        }
        let half = T::lit(0.5);
        if delta == half {
            return Ok(T::zero());
        }
        if delta > half {
            return self.upper_point(T::one() - delta).map(|t| -t);
        }
        // sf is decreasing on [0, inf); bracket, then bisect.
        let mut lo = T::zero();
        let mut hi = T::one();
        while self.sf(hi) > delta {
            lo = hi;
            hi = hi + hi;
            if !hi.is_finite() {
                return Ok(T::infinity());
            }
        }
        let tol = T::lit(QUANTILE_TOLERANCE);
        for _ in 0..400 {
            let mid = lo + (hi - lo) * half;
            if mid <= lo || mid >= hi || hi - lo <= tol {
                break;
            }
            if self.sf(mid) > delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo + (hi - lo) * half)
    }

    /// Inverse of [`cdf`](Self::cdf).
    pub fn inverse_cdf(&self, p: T) -> Result<T> {
        if p < T::lit(0.5) {
            self.upper_point(p).map(|t| -t)
        } else {
            self.upper_point(T::one() - p)
        }
    }
}

/// Free-function form of [`StudentT::upper_point`].
pub fn t_quantile<T: Scalar>(dist: &StudentT<T>, delta: T) -> Result<T> {
    dist.upper_point(delta)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let half = T::lit(0.5);
    if x < half {
        // Reflection keeps the series in its accurate range.
        let pi = T::lit(std::f64::consts::PI);
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(COEF[0]);
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_count(i));
    }
    let t = x + T::lit(7.5);
    T::lit(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)`, given both `x` and `y = 1 - x`
/// so that neither loses precision near the ends of `[0, 1]`.
pub fn regularized_beta<T: Scalar>(a: T, b: T, x: T, y: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if y <= T::zero() {
        return T::one();
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    let front = ln_front.exp();
    if x < (a + T::one()) / (a + b + T::lit(2.0)) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        T::one() - front * beta_continued_fraction(b, a, y) / b
    }
}

/// Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction<T: Scalar>(a: T, b: T, x: T) -> T {
    let tiny = T::min_positive_value() / T::epsilon();
    let eps = T::epsilon();
    let one = T::one();
    let two = T::lit(2.0);
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;
    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;
    for m in 1..20_000usize {
        let m = T::from_count(m);
        let m2 = two * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h = h * d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let del = d * c;
        h = h * del;
        if (del - one).abs() <= eps {
            break;
        }
    }
    h
}
