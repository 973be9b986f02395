//! Dense real linear algebra sized for tall `N x 2` least-squares systems.
//!
//! Everything here is value-semantic: inputs are borrowed, outputs are new
//! values. The SVD is a one-sided (Hestenes) Jacobi iteration, which is
//! accurate to working precision for the handful of columns used here.

use std::ops::{Deref, Index};

use thiserror::Error;

/// Relative pivot threshold below which a square solve is declared singular.
pub const SOLVE_SINGULAR_TOL: f64 = 1e-14;

/// Relative singular-value threshold for pseudo-inverse truncation.
pub const PINV_TRUNCATION_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("system is numerically singular (pivot ratio {ratio:e})")]
    SingularSystem { ratio: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix needs at least one row and one column")]
    Empty,
    #[error("{got} entries cannot fill a {rows}x{cols} matrix")]
    Shape {
        rows: usize,
        cols: usize,
        got: usize,
    },
    #[error("regularization parameter must be positive and finite, got {0}")]
    InvalidLambda(f64),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::Shape {
                rows,
                cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `AᵀA`, symmetric by construction.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let s: f64 = (0..self.rows)
                    .map(|i| self.get(i, a) * self.get(i, b))
                    .sum();
                g.set(a, b, s);
                g.set(b, a, s);
            }
        }
        g
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<DenseVector, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `Aᵀb`.
    pub fn transpose_mul_vec(&self, b: &[f64]) -> Result<DenseVector, LinalgError> {
        if b.len() != self.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "transpose of {}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                b.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &bi) in b.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * bi;
            }
        }
        Ok(DenseVector(out))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

/// Owned real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(pub Vec<f64>);

impl DenseVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FromIterator<f64> for DenseVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Solves the square system `Ax = b` by LU with partial pivoting.
///
/// A pivot smaller than [`SOLVE_SINGULAR_TOL`] times the largest entry of
/// `A` is treated as singular.
pub fn solve_square(a: &DenseMatrix, b: &[f64]) -> Result<DenseVector, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "solve needs a square matrix, got {}x{}",
            n,
            a.cols()
        )));
    }
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "{n}x{n} system with right-hand side of length {}",
            b.len()
        )));
    }
    let scale = a.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return Err(LinalgError::SingularSystem { ratio: 0.0 });
    }
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, m[i * n + k].abs()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        let ratio = pivot / scale;
        if ratio.is_nan() || ratio < SOLVE_SINGULAR_TOL {
            return Err(LinalgError::SingularSystem { ratio });
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        for i in k + 1..n {
            let f = m[i * n + k] / m[k * n + k];
            if f != 0.0 {
                for j in k..n {
                    m[i * n + j] -= f * m[k * n + j];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k * n + j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k * n + k];
    }
    Ok(DenseVector(x))
}

/// Least-squares solution of `Ax ≈ b` through the normal equations
/// `AᵀA x = Aᵀb`. For square `A` this is the exact solve `A⁻¹b`.
pub fn normal_equations_solve(a: &DenseMatrix, b: &[f64]) -> Result<DenseVector, LinalgError> {
    if a.rows() < a.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "normal equations need rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() == a.cols() {
        return solve_square(a, b);
    }
    let rhs = a.transpose_mul_vec(b)?;
    solve_square(&a.gram(), &rhs)
}

/// Minimizer of `‖Ax − b‖² + λ‖x‖²`, i.e. `(AᵀA + λI)⁻¹Aᵀb`.
pub fn tikhonov_solve(a: &DenseMatrix, b: &[f64], lambda: f64) -> Result<DenseVector, LinalgError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(LinalgError::InvalidLambda(lambda));
    }
    let rhs = a.transpose_mul_vec(b)?;
    let mut g = a.gram();
    for i in 0..g.rows() {
        let d = g.get(i, i);
        g.set(i, i, d + lambda);
    }
    solve_square(&g, &rhs)
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`.
///
/// With `r = min(rows, cols)`: `u` is `rows x r`, `v` is `cols x r`, and
/// `sigma` holds `r` values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

pub fn svd(a: &DenseMatrix) -> Svd {
    if a.rows() >= a.cols() {
        jacobi_svd(a)
    } else {
        let t = jacobi_svd(&a.transpose());
        Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        }
    }
}

// One-sided Jacobi on the columns of a tall matrix.
fn jacobi_svd(a: &DenseMatrix) -> Svd {
    let (m, n) = (a.rows(), a.cols());
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = w
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|x| x * x).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut u = DenseMatrix::zeros(m, n);
    let mut vm = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &(s, j)) in order.iter().enumerate() {
        sigma.push(s);
        for (i, &wi) in w[j].iter().enumerate().take(m) {
            u.set(i, k, if s > 0.0 { wi / s } else { 0.0 });
        }
        for (i, &vi) in v[j].iter().enumerate().take(n) {
            vm.set(i, k, vi);
        }
    }
    Svd { u, sigma, v: vm }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    for (xp, xq) in left[p].iter_mut().zip(right[0].iter_mut()) {
        let (a, b) = (*xp, *xq);
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

/// Minimum-norm least-squares solution `A⁺b`.
///
/// Singular values below [`PINV_TRUNCATION_TOL`] times the largest are
/// treated as zero, so rank deficiency never errors.
pub fn pseudo_inverse_solve(a: &DenseMatrix, b: &[f64]) -> Result<DenseVector, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} system with right-hand side of length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let Svd { u, sigma, v } = svd(a);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let mut x = vec![0.0; a.cols()];
    for (k, &s) in sigma.iter().enumerate() {
        if s <= PINV_TRUNCATION_TOL * smax || s == 0.0 {
            continue;
        }
        let coef: f64 = (0..u.rows()).map(|i| u.get(i, k) * b[i]).sum::<f64>() / s;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += coef * v.get(j, k);
        }
    }
    Ok(DenseVector(x))
}

/// Ratio of the largest to the smallest singular value.
///
/// Returns `+inf` when the smallest singular value is zero to working
/// precision (at or below `ε·σ_max`). Intended for Gram matrices `AᵀA`
/// assembled by the caller, but well defined for any shape.
pub fn condition_number(a: &DenseMatrix) -> f64 {
    let sigma = svd(a).sigma;
    let smax = sigma[0];
    let smin = *sigma.last().unwrap();
    if !smax.is_finite() || !smin.is_finite() {
        return f64::NAN;
    }
    if smax == 0.0 || smin <= f64::EPSILON * smax {
        return f64::INFINITY;
    }
    smax / smin
}
