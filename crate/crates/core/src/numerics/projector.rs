use crate::error::{Error, Result};
use crate::numerics::linalg::{factor_full_rank, Cholesky, Matrix};
use crate::Scalar;

/// The residual map `v -> v - U (U'U + aI)^{-1} U' v` for a design `U`
/// (dummy ones-column first) and ridge coefficient `a >= 0`.
///
/// The normal matrix is factored once at construction; applying the
/// projector costs `O(n p)`.
#[derive(Debug, Clone)]
pub struct RidgeProjector<T> {
    design: Matrix<T>,
    ridge: T,
    normal: Cholesky<T>,
}

impl<T: Scalar> RidgeProjector<T> {
    pub fn new(design: Matrix<T>, ridge: T) -> Result<Self> {
        let gram = design.gram();
        Self::with_gram(design, ridge, gram)
    }

    /// Builds the projector from a precomputed `U'U`, which callers keep up
    /// to date incrementally.
    pub fn with_gram(design: Matrix<T>, ridge: T, mut gram: Matrix<T>) -> Result<Self> {
        if !(ridge >= T::zero()) || !ridge.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ridge coefficient must be finite and nonnegative, got {ridge}"
            )));
        }
        let p = design.cols();
        if gram.rows() != p || gram.cols() != p {
            return Err(Error::InvalidArgument(format!(
                "normal matrix is {}x{}, design has {p} columns",
                gram.rows(),
                gram.cols()
            )));
        }
        let normal = if ridge == T::zero() {
            factor_full_rank(&gram)?
        } else {
            for i in 0..p {
                gram[(i, i)] = gram[(i, i)] + ridge;
            }
            Cholesky::new(&gram).ok_or(Error::RankDeficient { dim: p, rcond: 0.0 })?
        };
        Ok(Self {
            design,
            ridge,
            normal,
        })
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.design
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    pub fn len(&self) -> usize {
        self.design.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.design.rows() == 0
    }

    /// Ridge coefficients `(U'U + aI)^{-1} U' v`.
    pub fn coefficients(&self, v: &[T]) -> Vec<T> {
        self.normal.solve(&self.design.transpose_mul_vec(v))
    }

    /// `P v`, without the length check.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let fitted = self.design.mul_vec(&self.coefficients(v));
        v.iter().zip(fitted).map(|(&vi, fi)| vi - fi).collect()
    }

    /// Residual vector `e = y - U (U'U + aI)^{-1} U' y`.
    pub fn ridge_residuals(&self, responses: &[T]) -> Result<Vec<T>> {
        if responses.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "{} responses for a design with {} rows",
                responses.len(),
                self.len()
            )));
        }
        Ok(self.apply(responses))
    }

    /// Splits the residuals of `(fixed_responses..., y)` into `offset + y * slope`.
    pub fn residual_decomposition(&self, fixed_responses: &[T]) -> Result<ResidualDecomposition<T>> {
        let n = self.len();
        if n == 0 || fixed_responses.len() + 1 != n {
            return Err(Error::InvalidArgument(format!(
                "{} fixed responses for a design with {n} rows",
                fixed_responses.len()
            )));
        }
        let mut y0 = fixed_responses.to_vec();
        y0.push(T::zero());
        let offset = self.apply(&y0);
        // P u_n = u_n - U (U'U + aI)^{-1} z_n, with z_n the last design row.
        let c = self.normal.solve(self.design.row(n - 1));
        let mut slope: Vec<T> = self.design.mul_vec(&c).into_iter().map(|v| -v).collect();
        slope[n - 1] = slope[n - 1] + T::one();
        Ok(ResidualDecomposition { offset, slope })
    }
}

/// Residuals as an affine function `offset + y * slope` of the last response.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDecomposition<T> {
    pub offset: Vec<T>,
    pub slope: Vec<T>,
}

impl<T: Scalar> ResidualDecomposition<T> {
    pub fn len(&self) -> usize {
        self.offset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offset.is_empty()
    }

    pub fn residuals_at(&self, y: T) -> Vec<T> {
        self.offset
            .iter()
            .zip(&self.slope)
            .map(|(&a, &b)| a + y * b)
            .collect()
    }
}

/// Free-function form of [`RidgeProjector::ridge_residuals`].
pub fn ridge_residuals<T: Scalar>(projector: &RidgeProjector<T>, responses: &[T]) -> Result<Vec<T>> {
    projector.ridge_residuals(responses)
}

/// Free-function form of [`RidgeProjector::residual_decomposition`].
pub fn residual_decomposition<T: Scalar>(
    projector: &RidgeProjector<T>,
    fixed_responses: &[T],
) -> Result<ResidualDecomposition<T>> {
    projector.residual_decomposition(fixed_responses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ones(n: usize) -> Matrix<f64> {
        Matrix::from_row_major(n, 1, vec![1.0; n]).unwrap()
    }

    fn random_design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Matrix<f64> {
        let mut data = Vec::with_capacity(n * (k + 1));
        for _ in 0..n {
            data.push(1.0);
            data.extend((0..k).map(|_| rng.random_range(-2.0..2.0)));
        }
        Matrix::from_row_major(n, k + 1, data).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    #[test]
    fn constant_fit_examples() {
        let p = RidgeProjector::new(ones(2), 0.0).unwrap();
        assert!(close(&p.ridge_residuals(&[1.0, 1.0]).unwrap(), &[0.0, 0.0], 1e-15));
        assert!(close(&p.ridge_residuals(&[0.0, 2.0]).unwrap(), &[-1.0, 1.0], 1e-15));
        let shrunk = RidgeProjector::new(ones(1), 1.0).unwrap();
        assert!(close(&shrunk.ridge_residuals(&[2.0]).unwrap(), &[1.0], 1e-15));
    }

    #[test]
    fn decomposition_of_mean_centering() {
        let p = RidgeProjector::new(ones(2), 0.0).unwrap();
        let d = p.residual_decomposition(&[4.0]).unwrap();
        assert!(close(&d.offset, &[2.0, -2.0], 1e-15));
        assert!(close(&d.slope, &[-0.5, 0.5], 1e-15));
        let z = p.residual_decomposition(&[0.0]).unwrap();
        assert_eq!(z.offset, vec![0.0, 0.0]);
    }

    #[test]
    fn decomposition_agrees_with_direct_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let design = random_design(&mut rng, 6, 2);
        let p = RidgeProjector::new(design, 0.01).unwrap();
        let fixed: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d = p.residual_decomposition(&fixed).unwrap();
        for y in [-3.0, 0.0, 7.0] {
            let mut full = fixed.clone();
            full.push(y);
            let direct = p.ridge_residuals(&full).unwrap();
            assert!(close(&d.residuals_at(y), &direct, 1e-10));
        }
    }

    #[test]
    fn rank_deficient_design_without_ridge_errors() {
        // Two identical feature columns.
        let design = Matrix::from_rows(&[[1.0, 2.0, 2.0], [1.0, 3.0, 3.0], [1.0, 5.0, 5.0], [1.0, 1.0, 1.0]]).unwrap();
        assert!(matches!(
            RidgeProjector::new(design.clone(), 0.0),
            Err(Error::RankDeficient { .. })
        ));
        assert!(RidgeProjector::new(design, 0.01).is_ok());
        assert!(RidgeProjector::new(ones(3), -1.0).is_err());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let p = RidgeProjector::new(ones(3), 0.0).unwrap();
        assert!(p.ridge_residuals(&[1.0, 2.0]).is_err());
        assert!(p.residual_decomposition(&[1.0]).is_err());
    }

    #[test]
    fn fitted_component_shrinks_with_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let design = random_design(&mut rng, 15, 3);
        let y: Vec<f64> = (0..15).map(|_| rng.random_range(-4.0..4.0) + 3.0).collect();
        let mut previous = f64::INFINITY;
        for a in [0.0, 0.01, 1.0, 100.0] {
            let e = RidgeProjector::new(design.clone(), a).unwrap().ridge_residuals(&y).unwrap();
            let fitted: f64 = y.iter().zip(&e).map(|(yi, ei)| (yi - ei).powi(2)).sum::<f64>().sqrt();
            assert!(fitted <= previous + 1e-12, "a={a}: {fitted} > {previous}");
            previous = fitted;
        }
    }

    proptest! {
        #[test]
        fn projector_is_symmetric(seed in 0u64..1000, n in 3usize..12, k in 0usize..3, ridge in prop::sample::select(vec![0.0, 0.01, 1.0])) {
            prop_assume!(n > k + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = RidgeProjector::new(random_design(&mut rng, n, k), ridge).unwrap();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            // <Pv, w> = <v, Pw>
            let lhs: f64 = p.apply(&v).iter().zip(&w).map(|(a, b)| a * b).sum();
            let rhs: f64 = v.iter().zip(p.apply(&w)).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn unregularized_projector_is_idempotent(seed in 0u64..1000, n in 4usize..15, k in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = RidgeProjector::new(random_design(&mut rng, n, k), 0.0).unwrap();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let once = p.apply(&v);
            let twice = p.apply(&once);
            prop_assert!(close(&once, &twice, 1e-8));
        }
    }
}
