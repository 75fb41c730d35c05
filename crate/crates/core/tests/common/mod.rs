//! Independent reference computations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Leading `columns` entries of `(1, x)`.
pub fn design(x: &[f64], columns: usize) -> Vec<f64> {
    std::iter::once(1.0).chain(x.iter().copied()).take(columns).collect()
}

/// `y - U (U'U + ridge I)⁻¹ U'y`.
pub fn residuals(rows: &[Vec<f64>], y: &[f64], ridge: f64) -> Vec<f64> {
    let p = rows[0].len();
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (row, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            rhs[i] += row[i] * yi;
            for j in 0..p {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, r) in gram.iter_mut().enumerate() {
        r[i] += ridge;
    }
    let coef = solve(gram, rhs);
    rows.iter()
        .zip(y)
        .map(|(row, &yi)| yi - row.iter().zip(&coef).map(|(u, c)| u * c).sum::<f64>())
        .collect()
}

/// Residuals as `a + y b` in the unknown last response `y`.
pub fn offset_slope(rows: &[Vec<f64>], past: &[f64], ridge: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let mut y0 = past.to_vec();
    y0.push(0.0);
    let mut unit = vec![0.0; n];
    unit[n - 1] = 1.0;
    (residuals(rows, &y0, ridge), residuals(rows, &unit, ridge))
}

/// Two-sided critical value of Student's t with `dof` degrees of freedom.
pub fn t_critical(dof: f64, epsilon: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof).unwrap().inverse_cdf(1.0 - epsilon / 2.0)
}

/// Convex hull of `{y : inside(y)}` from probes at the sorted candidate
/// points, the midpoints between them and one point beyond each end.
pub fn hull_by_probing(mut points: Vec<f64>, inside: impl Fn(f64) -> bool) -> (f64, f64) {
    points.retain(|p| p.is_finite());
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    if points.is_empty() {
        return if inside(0.0) { (f64::NEG_INFINITY, f64::INFINITY) } else { (f64::INFINITY, f64::NEG_INFINITY) };
    }
    let m = points.len();
    // (probe, infimum of its piece, supremum of its piece)
    let mut probes = vec![(points[0] - 1.0 - points[0].abs(), f64::NEG_INFINITY, points[0])];
    for i in 0..m {
        probes.push((points[i], points[i], points[i]));
        let hi = if i + 1 < m { points[i + 1] } else { f64::INFINITY };
        let probe = if i + 1 < m { 0.5 * (points[i] + points[i + 1]) } else { points[i] + 1.0 + points[i].abs() };
        probes.push((probe, points[i], hi));
    }
    let kept: Vec<_> = probes.iter().filter(|(y, _, _)| inside(*y)).collect();
    match (kept.first(), kept.last()) {
        (Some(first), Some(last)) => (first.1, last.2),
        _ => (f64::INFINITY, f64::NEG_INFINITY),
    }
}

/// Deterministic conformal p-value of the absolute residual score.
pub fn iid_p(a: &[f64], b: &[f64], y: f64) -> f64 {
    let n = a.len();
    let e: Vec<f64> = a.iter().zip(b).map(|(a, b)| (a + y * b).abs()).collect();
    let last = e[n - 1];
    let count = e.iter().filter(|&&s| s - last >= -1e-10 * (1.0 + s + last)).count();
    count as f64 / n as f64
}

/// Hull of `{y : p(y) > ε}` by evaluation at every critical point and cell.
pub fn iid_oracle(a: &[f64], b: &[f64], epsilon: f64) -> (f64, f64) {
    let n = a.len();
    let (an, bn) = (a[n - 1], b[n - 1]);
    let mut points = Vec::new();
    for i in 0..n - 1 {
        if b[i] != bn {
            points.push((an - a[i]) / (b[i] - bn));
        }
        if b[i] != -bn {
            points.push(-(an + a[i]) / (b[i] + bn));
        }
    }
    hull_by_probing(points, |y| iid_p(a, b, y) > epsilon)
}

/// Whether `y` lies in the region where the centered last residual is
/// within the Student-t bound.
pub fn mva_inside(a: &[f64], b: &[f64], y: f64, t: f64) -> bool {
    let n = a.len();
    let e: Vec<f64> = a.iter().zip(b).map(|(a, b)| a + y * b).collect();
    let mean = e[..n - 1].iter().sum::<f64>() / (n - 1) as f64;
    let spread: f64 = e[..n - 1].iter().map(|v| (v - mean).powi(2)).sum();
    let dev = e[n - 1] - mean;
    ((n - 1) * (n - 2)) as f64 * dev * dev < t * t * n as f64 * spread
}

/// Sorted grid: step 1e-3 on [-100, 100], step 1 out to ±1e4, and far
/// points out to ±1e12.
pub fn mva_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (-100_000..=100_000).map(|i| i as f64 * 1e-3).collect();
    for i in 101..=10_000 {
        grid.push(i as f64);
        grid.push(-(i as f64));
    }
    for e in [1e5, 1e6, 1e8, 1e10, 1e12] {
        grid.push(e);
        grid.push(-e);
    }
    grid.sort_by(f64::total_cmp);
    grid
}

fn bisect(mut outside: f64, mut inside: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (outside + inside);
        if mid == outside || mid == inside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
        if (outside - inside).abs() <= 1e-12 * (1.0 + inside.abs()) {
            break;
        }
    }
    0.5 * (outside + inside)
}

/// Hull of the MVA region from a grid scan, with bisection at the edges.
pub fn mva_oracle(a: &[f64], b: &[f64], epsilon: f64, grid: &[f64]) -> (f64, f64) {
    let n = a.len();
    let head_zero = |y: f64| {
        let e: Vec<f64> = a[..n - 1].iter().zip(b).map(|(a, b)| a + y * b).collect();
        let mean = e.iter().sum::<f64>() / (n - 1) as f64;
        e.iter().all(|v| (v - mean).abs() <= 1e-12 * (1.0 + mean.abs()))
    };
    if head_zero(0.0) && head_zero(1.0) {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let t = t_critical((n - 2) as f64, epsilon);
    let inside = |y: f64| mva_inside(a, b, y, t);
    let flags: Vec<bool> = grid.iter().map(|&y| inside(y)).collect();
    let (Some(first), Some(last)) = (flags.iter().position(|&f| f), flags.iter().rposition(|&f| f)) else {
        return (f64::INFINITY, f64::NEG_INFINITY);
    };
    let lower = if first == 0 { f64::NEG_INFINITY } else { bisect(grid[first - 1], grid[first], inside) };
    let upper = if last == grid.len() - 1 { f64::INFINITY } else { bisect(grid[last + 1], grid[last], inside) };
    (lower, upper)
}

/// Classical interval from ordinary least squares on `(x, y)` rows.
pub fn gauss_oracle(xs: &[Vec<f64>], ys: &[f64], x_new: &[f64], epsilon: f64) -> (f64, f64) {
    let p = xs[0].len() + 1;
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| design(x, p)).collect();
    let e = residuals(&rows, ys, 0.0);
    let rss: f64 = e.iter().map(|v| v * v).sum();
    let dof = (ys.len() - p) as f64;
    let sigma = (rss / dof).sqrt();
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (row, &y) in rows.iter().zip(ys) {
        for i in 0..p {
            rhs[i] += row[i] * y;
            for j in 0..p {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    let coef = solve(gram.clone(), rhs);
    let z = design(x_new, p);
    let fit: f64 = z.iter().zip(&coef).map(|(a, b)| a * b).sum();
    let w = solve(gram, z.clone());
    let h: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
    let half = t_critical(dof, epsilon) * sigma * (1.0 + h).sqrt();
    (fit - half, fit + half)
}

/// Random regression data `y = 1 + Σ x_k + ξ` with standard normal inputs.
pub fn random_stream(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<(Vec<f64>, f64)> {
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let noise: f64 = rng.sample(StandardNormal);
            let y = 1.0 + x.iter().sum::<f64>() + noise;
            (x, y)
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Endpoints agree: equal infinities or within `tol · max(1, |x|)`.
pub fn endpoint_close(x: f64, y: f64, tol: f64) -> bool {
    if x.is_infinite() || y.is_infinite() {
        return x == y;
    }
    (x - y).abs() <= tol * x.abs().max(1.0)
}
