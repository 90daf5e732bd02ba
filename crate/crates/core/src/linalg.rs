//! Small dense solves used by the optimizer: the local linear regression and
//! the nonnegative least-squares problem for the Lagrange multipliers.
//!
//! Matrices here have a handful of rows and columns, so everything is plain
//! `Vec<f64>` storage with Householder reflections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative rank tolerance of the pivoted QR.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// KKT tolerance of the NNLS active-set iteration.
pub const NNLS_TOLERANCE: f64 = 1e-10;

/// Row-major dense matrix whose rows are sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    rows: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self { rows };
        m.validate()?;
        Ok(m)
    }

    /// An empty matrix with `n` columns, to be filled by [`DesignMatrix::push_row`].
    pub(crate) fn empty() -> Self {
        Self { rows: Vec::new() }
    }

    pub(crate) fn push_row(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    fn validate(&self) -> Result<()> {
        let Some(first) = self.rows.first() else {
            return Err(Error::InvalidArgument(
                "design matrix needs at least one row".into(),
            ));
        };
        if first.is_empty() {
            return Err(Error::InvalidArgument(
                "design matrix needs at least one column".into(),
            ));
        }
        for row in &self.rows {
            if row.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("design matrix"));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModelFit {
    pub gradient: Vec<f64>,
    pub intercept: f64,
    pub residual_norm: f64,
}

impl LinearModelFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.gradient, x)
    }
}

/// Fits `values ≈ intercept + gradientᵀ row` by least squares.
///
/// Rank-deficient designs (for example when perturbations were skipped at a
/// bound) get the minimal-norm solution.
pub fn least_squares_fit(points: &DesignMatrix, values: &[f64]) -> Result<LinearModelFit> {
    points.validate()?;
    if values.len() != points.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: points.n_rows(),
            found: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression values"));
    }
    let n = points.n_cols();
    let augmented: Vec<Vec<f64>> = points
        .rows
        .iter()
        .map(|r| {
            let mut row = r.clone();
            row.push(1.0);
            row
        })
        .collect();
    let a = ColMajor::from_rows(&augmented, n + 1);
    let beta = min_norm_lstsq(&a, values);
    let residual_norm = augmented
        .iter()
        .zip(values)
        .map(|(row, y)| (dot(row, &beta) - y).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LinearModelFit {
        gradient: beta[..n].to_vec(),
        intercept: beta[n],
        residual_norm,
    })
}

/// Column-major storage, `m` rows by `n` columns.
#[derive(Clone)]
struct ColMajor {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl ColMajor {
    fn from_rows(rows: &[Vec<f64>], n: usize) -> Self {
        let m = rows.len();
        let mut data = vec![0.0; m * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                data[j * m + i] = x;
            }
        }
        Self { m, n, data }
    }

    fn from_cols(cols: &[&[f64]], m: usize) -> Self {
        let mut data = Vec::with_capacity(m * cols.len());
        for c in cols {
            data.extend_from_slice(c);
        }
        Self {
            m,
            n: cols.len(),
            data,
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.m..(j + 1) * self.m]
    }

    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.m..(j + 1) * self.m]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.m + i]
    }

    fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.m * self.n];
        for j in 0..self.n {
            for i in 0..self.m {
                data[i * self.n + j] = self.get(i, j);
            }
        }
        Self {
            m: self.n,
            n: self.m,
            data,
        }
    }
}

/// Householder QR with column pivoting, stored compactly.
struct PivotedQr {
    /// R in the upper triangle, reflectors below it.
    qr: ColMajor,
    /// Householder scalars.
    tau: Vec<f64>,
    /// `perm[k]` is the original column at position `k`.
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    #[allow(clippy::needless_range_loop)]
    fn factor(a: &ColMajor, pivot: bool) -> Self {
        let mut qr = a.clone();
        let (m, n) = (a.m, a.n);
        let steps = m.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut tau = vec![0.0; steps];
        let max_norm = (0..n).map(|j| norm(a.col(j))).fold(0.0, f64::max);
        let tol = RANK_TOLERANCE * max_norm;
        let mut rank = 0;

        for k in 0..steps {
            if pivot {
                // remaining column with the largest trailing norm
                let best = (k..n)
                    .map(|j| (j, norm(&qr.col(j)[k..])))
                    .fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
                if best.0 != k {
                    for i in 0..m {
                        qr.data.swap(k * m + i, best.0 * m + i);
                    }
                    perm.swap(k, best.0);
                }
            }
            let col = &mut qr.col_mut(k)[k..];
            let alpha = norm(col);
            if alpha <= tol || alpha == 0.0 {
                break;
            }
            rank += 1;
            // v = x + sign(x0) |x| e1, normalized so v0 = 1
            let x0 = col[0];
            let beta = if x0 >= 0.0 { -alpha } else { alpha };
            let v0 = x0 - beta;
            for x in col[1..].iter_mut() {
                *x /= v0;
            }
            col[0] = beta;
            tau[k] = (beta - x0) / beta;
            let v: Vec<f64> = std::iter::once(1.0)
                .chain(qr.col(k)[k + 1..].iter().copied())
                .collect();
            for j in k + 1..n {
                let c = &mut qr.col_mut(j)[k..];
                let s = tau[k] * dot(&v, c);
                for (ci, vi) in c.iter_mut().zip(&v) {
                    *ci -= s * vi;
                }
            }
        }
        Self {
            qr,
            tau,
            perm,
            rank,
        }
    }

    /// Applies `Qᵀ` to `b` in place.
    fn apply_qt(&self, b: &mut [f64]) {
        let m = self.qr.m;
        for k in 0..self.rank {
            let col = self.qr.col(k);
            let mut s = b[k];
            for i in k + 1..m {
                s += col[i] * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in k + 1..m {
                b[i] -= s * col[i];
            }
        }
    }

    /// Applies `Q` (first `rank` columns) to a vector of length `rank`.
    fn apply_q(&self, y: &[f64]) -> Vec<f64> {
        let m = self.qr.m;
        let mut out = vec![0.0; m];
        out[..y.len()].copy_from_slice(y);
        for k in (0..self.rank).rev() {
            let col = self.qr.col(k);
            let mut s = out[k];
            for i in k + 1..m {
                s += col[i] * out[i];
            }
            s *= self.tau[k];
            out[k] -= s;
            for i in k + 1..m {
                out[i] -= s * col[i];
            }
        }
        out
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        self.qr.get(i, j)
    }
}

/// Minimal-norm solution of `min ‖A x − b‖₂` via a complete orthogonal
/// decomposition.
fn min_norm_lstsq(a: &ColMajor, b: &[f64]) -> Vec<f64> {
    let n = a.n;
    let qr = PivotedQr::factor(a, true);
    let r = qr.rank;
    let mut x = vec![0.0; n];
    if r == 0 {
        return x;
    }
    let mut c = b.to_vec();
    qr.apply_qt(&mut c);
    let c = &c[..r];

    let y = if r == n {
        back_substitute(|i, j| qr.r(i, j), c)
    } else {
        // R_top = [R11 R12] is r×n; factor R_topᵀ = Z T so that the
        // minimal-norm solution of R_top y = c is Z T⁻ᵀ c.
        let mut rt = ColMajor {
            m: r,
            n,
            data: vec![0.0; r * n],
        };
        for j in 0..n {
            for i in 0..r.min(j + 1) {
                rt.data[j * r + i] = qr.r(i, j);
            }
        }
        let second = PivotedQr::factor(&rt.transpose(), false);
        let t_rank = second.rank;
        // solve Tᵀ w = c, forward substitution on the lower-triangular Tᵀ
        let mut w = vec![0.0; t_rank];
        for i in 0..t_rank {
            let mut s = c[i];
            for (k, wk) in w.iter().enumerate().take(i) {
                s -= second.r(k, i) * wk;
            }
            w[i] = s / second.r(i, i);
        }
        second.apply_q(&w)
    };
    for (k, &p) in qr.perm.iter().enumerate() {
        x[p] = y[k];
    }
    x
}

#[allow(clippy::needless_range_loop)]
fn back_substitute(r: impl Fn(usize, usize) -> f64, c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = c[i];
        for j in i + 1..n {
            s -= r(i, j) * x[j];
        }
        x[i] = s / r(i, i);
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeSolution {
    pub lambda: Vec<f64>,
    pub stationarity_norm: f64,
}

/// Gradient of the Lagrangian, `grad_phi + Σ_j λ_j grad_g[j]`.
pub fn lagrangian_gradient(grad_phi: &[f64], grad_g: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let mut out = grad_phi.to_vec();
    for (g, &l) in grad_g.iter().zip(lambda) {
        for (o, gi) in out.iter_mut().zip(g) {
            *o += l * gi;
        }
    }
    out
}

/// Multipliers `λ >= 0` with `λ_j = 0` outside `active` minimizing
/// `‖grad_phi + Σ_j λ_j grad_g[j]‖₂²`.
///
/// Lawson–Hanson active-set iteration. Among equally violating multipliers the
/// lowest index enters first, so degenerate problems resolve deterministically.
pub fn solve_lagrange(
    grad_phi: &[f64],
    grad_g: &[Vec<f64>],
    active: &[usize],
) -> Result<LagrangeSolution> {
    let n_u = grad_phi.len();
    let n_g = grad_g.len();
    for g in grad_g {
        if g.len() != n_u {
            return Err(Error::DimensionMismatch {
                expected: n_u,
                found: g.len(),
            });
        }
    }
    if let Some(&j) = active.iter().find(|&&j| j >= n_g) {
        return Err(Error::InvalidArgument(format!(
            "active index {j} out of range for {n_g} constraints"
        )));
    }
    let mut free: Vec<usize> = active.to_vec();
    free.sort_unstable();
    free.dedup();

    // minimize ‖A x − b‖ with A = [grad_g_j]_{j ∈ free}, b = −grad_phi
    let b: Vec<f64> = grad_phi.iter().map(|x| -x).collect();
    let cols: Vec<&[f64]> = free.iter().map(|&j| grad_g[j].as_slice()).collect();
    let x = nnls(&cols, &b, n_u);

    let mut lambda = vec![0.0; n_g];
    for (&j, xj) in free.iter().zip(x) {
        lambda[j] = xj;
    }
    let stationarity_norm = norm(&lagrangian_gradient(grad_phi, grad_g, &lambda));
    Ok(LagrangeSolution {
        lambda,
        stationarity_norm,
    })
}

fn nnls(cols: &[&[f64]], b: &[f64], m: usize) -> Vec<f64> {
    let n = cols.len();
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    let mut passive = vec![false; n];
    let max_iter = 100 * n;

    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for (c, &xj) in cols.iter().zip(x) {
            for (ri, ci) in r.iter_mut().zip(c.iter()) {
                *ri -= xj * ci;
            }
        }
        r
    };

    for _ in 0..max_iter {
        let r = residual(&x);
        let w: Vec<f64> = cols.iter().map(|c| dot(c, &r)).collect();
        // entering variable: largest w among zero-bound variables, lowest index on ties
        let mut entering = None;
        let mut best = NNLS_TOLERANCE;
        for j in 0..n {
            if !passive[j] && w[j] > best {
                best = w[j];
                entering = Some(j);
            }
        }
        let Some(t) = entering else { break };
        passive[t] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub_cols: Vec<&[f64]> = idx.iter().map(|&j| cols[j]).collect();
            let z_sub = min_norm_lstsq(&ColMajor::from_cols(&sub_cols, m), b);
            let mut z = vec![0.0; n];
            for (&j, zj) in idx.iter().zip(&z_sub) {
                z[j] = *zj;
            }
            if idx.iter().all(|&j| z[j] > 0.0) {
                x = z;
                break;
            }
            // step back toward x until a passive variable hits zero
            let mut alpha = 1.0;
            let mut blocking = None;
            for &j in &idx {
                if z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    let a = if denom > 0.0 { x[j] / denom } else { 0.0 };
                    if a < alpha || blocking.is_none() {
                        alpha = a;
                        blocking = Some(j);
                    }
                }
            }
            for j in 0..n {
                x[j] += alpha * (z[j] - x[j]);
            }
            let scale = x.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            for &j in &idx {
                if Some(j) == blocking || x[j] <= NNLS_TOLERANCE * scale {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    #![allow(clippy::needless_range_loop)]

    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Normal equations solved by Gaussian elimination with partial pivoting;
    /// independent of the QR route.
    fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let n = rows[0].len() + 1;
        let mut ata = vec![vec![0.0; n + 1]; n];
        for (row, &yi) in rows.iter().zip(y) {
            let mut r = row.clone();
            r.push(1.0);
            for i in 0..n {
                for j in 0..n {
                    ata[i][j] += r[i] * r[j];
                }
                ata[i][n] += r[i] * yi;
            }
        }
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))
                .unwrap();
            ata.swap(col, piv);
            for r in col + 1..n {
                let f = ata[r][col] / ata[col][col];
                for c in col..=n {
                    ata[r][c] -= f * ata[col][c];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = ata[i][n];
            for j in i + 1..n {
                s -= ata[i][j] * x[j];
            }
            x[i] = s / ata[i][i];
        }
        x
    }

    fn rss(rows: &[Vec<f64>], y: &[f64], grad: &[f64], icpt: f64) -> f64 {
        rows.iter()
            .zip(y)
            .map(|(r, yi)| (icpt + dot(grad, r) - yi).powi(2))
            .sum()
    }

    #[test]
    fn exact_plane_is_recovered() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.3, 0.7],
            vec![0.9, 0.2],
        ];
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - r[1] + 3.0).collect();
        let fit = least_squares_fit(&DesignMatrix::new(rows).unwrap(), &y).unwrap();
        assert_relative_eq!(fit.gradient[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(fit.gradient[1], -1.0, epsilon = 1e-10);
        assert_relative_eq!(fit.intercept, 3.0, epsilon = 1e-10);
        assert!(fit.residual_norm < 1e-10);
    }

    #[test]
    fn symmetric_pattern_gives_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let c = [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
            let d = rng.random_range(0.01..0.2);
            let rows = vec![
                vec![c[0], c[1]],
                vec![c[0] + d, c[1]],
                vec![c[0] - d, c[1]],
                vec![c[0], c[1] + d],
                vec![c[0], c[1] - d],
            ];
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fit = least_squares_fit(&DesignMatrix::new(rows).unwrap(), &y).unwrap();
            assert!((fit.gradient[0] - (y[1] - y[2]) / (2.0 * d)).abs() < 1e-10);
            assert!((fit.gradient[1] - (y[3] - y[4]) / (2.0 * d)).abs() < 1e-10);
        }
    }

    #[test]
    fn one_sided_pattern_gives_forward_difference() {
        let rows = vec![
            vec![0.0, 0.5],
            vec![0.05, 0.5],
            vec![0.0, 0.55],
            vec![0.0, 0.45],
        ];
        let y = vec![1.0, 1.2, 0.9, 1.1];
        let fit = least_squares_fit(&DesignMatrix::new(rows).unwrap(), &y).unwrap();
        assert_relative_eq!(fit.gradient[0], (1.2 - 1.0) / 0.05, epsilon = 1e-9);
    }

    #[test]
    fn overdetermined_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(n + 2..n + 10);
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let fit = least_squares_fit(&DesignMatrix::new(rows.clone()).unwrap(), &y).unwrap();
            let oracle = normal_equations(&rows, &y);
            for i in 0..n {
                let scale = oracle[i].abs().max(1.0);
                assert!((fit.gradient[i] - oracle[i]).abs() <= 1e-8 * scale);
            }
            assert!((fit.intercept - oracle[n]).abs() <= 1e-8 * oracle[n].abs().max(1.0));
        }
    }

    #[test]
    fn rank_deficient_returns_minimal_norm() {
        // single point: any plane through it fits; minimal norm is (x, 1)·β = y
        let fit =
            least_squares_fit(&DesignMatrix::new(vec![vec![0.5, 0.5]]).unwrap(), &[3.0]).unwrap();
        // β = y · v / ‖v‖² with v = (0.5, 0.5, 1)
        let s = 3.0 / 1.5;
        assert_relative_eq!(fit.gradient[0], 0.5 * s, epsilon = 1e-12);
        assert_relative_eq!(fit.gradient[1], 0.5 * s, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, s, epsilon = 1e-12);

        // one axis never perturbed: collinear column, fit stays finite and exact
        let rows = vec![vec![0.5, 0.3], vec![0.6, 0.3], vec![0.4, 0.3]];
        let fit = least_squares_fit(&DesignMatrix::new(rows).unwrap(), &[1.0, 2.0, 0.0]).unwrap();
        assert_relative_eq!(fit.gradient[0], 10.0, epsilon = 1e-9);
        assert!(fit.residual_norm < 1e-10);
        assert!(fit.gradient[1].is_finite());
    }

    #[test]
    fn rejects_non_finite() {
        let m = DesignMatrix::new(vec![vec![0.5]]).unwrap();
        assert!(matches!(
            least_squares_fit(&m, &[f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(DesignMatrix::new(vec![vec![f64::INFINITY]]).is_err());
        assert!(DesignMatrix::new(vec![]).is_err());
    }

    #[test]
    fn lagrange_examples() {
        let sol = solve_lagrange(&[3.0, 4.0], &[vec![1.0, 0.0]], &[]).unwrap();
        assert_eq!(sol.lambda, vec![0.0]);
        assert_relative_eq!(sol.stationarity_norm, 5.0);

        let sol = solve_lagrange(&[1.0, 0.0], &[vec![-1.0, 0.0]], &[0]).unwrap();
        assert_relative_eq!(sol.lambda[0], 1.0, epsilon = 1e-12);
        assert!(sol.stationarity_norm < 1e-12);

        let sol = solve_lagrange(&[1.0, 0.0], &[vec![1.0, 0.0]], &[0]).unwrap();
        assert_eq!(sol.lambda, vec![0.0]);

        assert!(matches!(
            solve_lagrange(&[1.0, 0.0], &[vec![1.0]], &[0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_lagrange_is_deterministic() {
        // two identical constraint gradients: optimal set is a segment
        let g = vec![vec![-1.0, 0.0], vec![-1.0, 0.0]];
        let a = solve_lagrange(&[1.0, 0.0], &g, &[0, 1]).unwrap();
        let b = solve_lagrange(&[1.0, 0.0], &g, &[1, 0]).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a.lambda[0], 1.0, epsilon = 1e-12);
        assert_eq!(a.lambda[1], 0.0);
    }

    fn objective(gp: &[f64], gg: &[Vec<f64>], l: &[f64]) -> f64 {
        let r = lagrangian_gradient(gp, gg, l);
        dot(&r, &r)
    }

    #[test]
    fn lagrange_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let gp = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let gg: Vec<Vec<f64>> = (0..2)
                .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect();
            let sol = solve_lagrange(&gp, &gg, &[0, 1]).unwrap();
            let mut best = f64::INFINITY;
            let steps = 1000; // resolution 1e-2 here; acceptance runs 1e-3
            for i in 0..=steps {
                for j in 0..=steps {
                    let l = [
                        10.0 * i as f64 / steps as f64,
                        10.0 * j as f64 / steps as f64,
                    ];
                    best = best.min(objective(&gp, &gg, &l));
                }
            }
            assert!(objective(&gp, &gg, &sol.lambda) <= best + 1e-8);
        }
    }

    proptest! {
        #[test]
        fn least_squares_is_first_order_optimal(
            pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 4..12),
            ys in prop::collection::vec(-3.0f64..3.0, 12),
        ) {
            let y = &ys[..pts.len()];
            let fit = least_squares_fit(&DesignMatrix::new(pts.clone()).unwrap(), y).unwrap();
            let base = rss(&pts, y, &fit.gradient, fit.intercept);
            for k in 0..3 {
                for h in [1e-4, -1e-4] {
                    let mut g = fit.gradient.clone();
                    let mut c = fit.intercept;
                    if k < 2 { g[k] += h } else { c += h }
                    prop_assert!(rss(&pts, y, &g, c) >= base - 1e-12);
                }
            }
        }

        #[test]
        fn lagrange_kkt_and_homogeneity(
            gp in prop::collection::vec(-3.0f64..3.0, 2..4),
            gg in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..4),
            mask in prop::collection::vec(any::<bool>(), 4),
            scale in 0.1f64..10.0,
        ) {
            let n_u = gp.len();
            let gg: Vec<Vec<f64>> = gg.into_iter().map(|g| g[..n_u].to_vec()).collect();
            let active: Vec<usize> = (0..gg.len()).filter(|&j| mask[j]).collect();
            let sol = solve_lagrange(&gp, &gg, &active).unwrap();
            let r = lagrangian_gradient(&gp, &gg, &sol.lambda);
            for j in 0..gg.len() {
                let partial = 2.0 * dot(&gg[j], &r);
                prop_assert!(sol.lambda[j] >= 0.0);
                if !active.contains(&j) {
                    prop_assert_eq!(sol.lambda[j], 0.0);
                } else if sol.lambda[j] > 0.0 {
                    prop_assert!(partial.abs() <= 1e-6, "partial {} at λ {}", partial, sol.lambda[j]);
                } else {
                    prop_assert!(partial >= -1e-6);
                }
            }
            let gp2: Vec<f64> = gp.iter().map(|x| x * scale).collect();
            let gg2: Vec<Vec<f64>> = gg.iter().map(|g| g.iter().map(|x| x * scale).collect()).collect();
            let sol2 = solve_lagrange(&gp2, &gg2, &active).unwrap();
            // degenerate instances may have a continuum of minimizers; compare objectives there
            let obj1 = objective(&gp, &gg, &sol.lambda);
            let obj2 = objective(&gp2, &gg2, &sol2.lambda) / (scale * scale);
            prop_assert!((obj1 - obj2).abs() <= 1e-8 * (1.0 + obj1));
            if active.len() <= n_u {
                for (a, b) in sol.lambda.iter().zip(&sol2.lambda) {
                    prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "λ {:?} vs {:?}", sol.lambda, sol2.lambda);
                }
            }
            prop_assert!((sol2.stationarity_norm - scale * sol.stationarity_norm).abs() <= 1e-8 * (1.0 + sol2.stationarity_norm));
        }
    }
}
