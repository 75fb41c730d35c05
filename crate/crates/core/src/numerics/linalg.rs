//! Small dense linear algebra: row-major matrices and a Cholesky factor for
//! the `(K+1)x(K+1)` normal matrices the predictors solve against.

use crate::error::{Error, Result};
use crate::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `A'A`.
    pub fn gram(&self) -> Matrix<T> {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..p {
                let ri = row[i];
                if ri == T::zero() {
                    continue;
                }
                for j in i..p {
                    g.data[i * p + j] = g.data[i * p + j] + ri * row[j];
                }
            }
        }
        g.symmetrize_upper();
        g
    }

    /// `A'v`.
    pub fn transpose_mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o = *o + a * vr;
            }
        }
        out
    }

    /// `Av`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    /// Leading `k x k` block.
    pub fn leading_block(&self, k: usize) -> Matrix<T> {
        let mut m = Matrix::zeros(k, k);
        for i in 0..k {
            m.data[i * k..(i + 1) * k].copy_from_slice(&self.row(i)[..k]);
        }
        m
    }

    /// Adds `scale * v v'` in place.
    pub fn add_outer(&mut self, v: &[T], scale: T) {
        debug_assert!(self.rows == v.len() && self.cols == v.len());
        let p = self.cols;
        for i in 0..p {
            let vi = v[i] * scale;
            for j in 0..p {
                self.data[i * p + j] = self.data[i * p + j] + vi * v[j];
            }
        }
    }

    fn symmetrize_upper(&mut self) {
        let p = self.cols;
        for i in 0..p {
            for j in 0..i {
                self.data[i * p + j] = self.data[j * p + i];
            }
        }
    }

    fn one_norm(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Reciprocal condition numbers below this mark a normal matrix as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `A = L L'`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    factor: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric matrix; `None` if a pivot is not strictly
    /// positive.
    pub fn new(a: &Matrix<T>) -> Option<Self> {
        let p = a.rows();
        let mut l = Matrix::zeros(p, p);
        for j in 0..p {
            let mut d = a[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..p {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(Self { factor: l })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let l = &self.factor;
        let p = l.rows();
        debug_assert_eq!(b.len(), p);
        let mut x = b.to_vec();
        for i in 0..p {
            let mut s = x[i];
            for k in 0..i {
                s = s - l[(i, k)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
        for i in (0..p).rev() {
            let mut s = x[i];
            for k in i + 1..p {
                s = s - l[(k, i)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
        x
    }

    /// `v' A^{-1} v`.
    pub fn inverse_quadratic_form(&self, v: &[T]) -> T {
        // With A = LL', v'A^{-1}v = |L^{-1} v|^2.
        let l = &self.factor;
        let p = l.rows();
        let mut w = v.to_vec();
        for i in 0..p {
            let mut s = w[i];
            for k in 0..i {
                s = s - l[(i, k)] * w[k];
            }
            w[i] = s / l[(i, i)];
        }
        dot(&w, &w)
    }
}

/// Factors `A`, rejecting it when the reciprocal 1-norm condition number of
/// its unit-diagonal rescaling falls below [`RCOND_THRESHOLD`].
pub fn factor_full_rank<T: Scalar>(a: &Matrix<T>) -> Result<Cholesky<T>> {
    let p = a.rows();
    let singular = |rcond: f64| Error::RankDeficient { dim: p, rcond };
    if p == 0 {
        return Err(singular(0.0));
    }
    let mut scale = Vec::with_capacity(p);
    for i in 0..p {
        let d = a[(i, i)];
        if !(d > T::zero()) {
            return Err(singular(0.0));
        }
        scale.push(T::one() / d.sqrt());
    }
    let mut scaled = a.clone();
    for i in 0..p {
        for j in 0..p {
            scaled[(i, j)] = a[(i, j)] * scale[i] * scale[j];
        }
    }
    let chol = Cholesky::new(&scaled).ok_or_else(|| singular(0.0))?;
    let mut inv_norm = T::zero();
    let mut e = vec![T::zero(); p];
    for j in 0..p {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[j] = T::one();
        let col = chol.solve(&e);
        inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
    }
    let rcond = (T::one() / (scaled.one_norm() * inv_norm))
        .to_f64()
        .unwrap_or(0.0);
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(singular(rcond));
    }
    Cholesky::new(a).ok_or_else(|| singular(rcond))
}
