//! Small dense and banded linear algebra kernels.
//!
//! Problem sizes here are tiny (a handful of parameters) or banded (structured
//! quadrilateral meshes), so the kernels are written directly instead of
//! pulling in a LAPACK binding.

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    /// Builds a matrix from column vectors. Panics on ragged input.
    pub fn from_columns(cols: &[Vec<F>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged matrix columns");
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
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

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect()
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![F::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += *a * *vi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Gram matrix `selfᵀ · self`.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                for j in i..n {
                    g[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        g
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> F {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<F>())
            .fold(F::zero(), F::max)
    }
}

impl<F> std::ops::Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for Matrix<F> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn norm2<F: Scalar>(v: &[F]) -> F {
    // scaled to avoid overflow on large residual entries
    let scale = v.iter().fold(F::zero(), |m, x| m.max(x.abs()));
    if scale == F::zero() || !scale.is_finite() {
        return scale;
    }
    let s: F = v.iter().map(|x| (*x / scale) * (*x / scale)).sum();
    scale * s.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("matrix is singular (zero pivot in column {0})")]
    ZeroPivot(usize),
    #[error("matrix is numerically singular (condition estimate {0:e})")]
    IllConditioned(f64),
    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<F> {
    lu: Matrix<F>,
    perm: Vec<usize>,
}

impl<F: Scalar> Lu<F> {
    pub fn factor(mut a: Matrix<F>) -> Result<Self, SolveError> {
        assert_eq!(a.rows, a.cols, "LU requires a square matrix");
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, F::zero()), |best, c| if c.1 > best.1 { c } else { best });
            if pmax == F::zero() || !pmax.is_finite() {
                return Err(SolveError::ZeroPivot(k));
            }
            if p != k {
                for j in 0..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                if f == F::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &[F]) -> Vec<F> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<F> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<F> {
        let n = self.lu.rows;
        let cols: Vec<Vec<F>> = (0..n)
            .map(|j| {
                let mut e = vec![F::zero(); n];
                e[j] = F::one();
                self.solve(&e)
            })
            .collect();
        Matrix::from_columns(&cols)
    }
}

/// Solves `a · x = b` and rejects systems whose 1-norm condition number
/// exceeds [`Scalar::max_condition`].
pub fn solve_checked<F: Scalar>(a: &Matrix<F>, b: &[F]) -> Result<Vec<F>, SolveError> {
    let lu = Lu::factor(a.clone())?;
    let cond = a.norm_1() * lu.inverse().norm_1();
    if !cond.is_finite() || cond > F::max_condition() {
        return Err(SolveError::IllConditioned(cond.to_f64_lossy()));
    }
    let x = lu.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::IllConditioned(f64::INFINITY));
    }
    Ok(x)
}

/// Symmetric banded matrix stored by lower diagonals.
///
/// `band[i][d]` holds entry `(i, i - d)` for `d ≤ half_bandwidth`.
#[derive(Debug, Clone)]
pub struct SymBand<F> {
    n: usize,
    hbw: usize,
    band: Vec<F>,
}

impl<F: Scalar> SymBand<F> {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        Self {
            n,
            hbw: half_bandwidth,
            band: vec![F::zero(); n * (half_bandwidth + 1)],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_bandwidth(&self) -> usize {
        self.hbw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        (d <= self.hbw).then(|| r * (self.hbw + 1) + d)
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.slot(i, j).map_or(F::zero(), |s| self.band[s])
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`). Entries outside
    /// the band panic, since they indicate a wrong bandwidth estimate.
    pub fn add(&mut self, i: usize, j: usize, v: F) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside half bandwidth {}", self.hbw));
        self.band[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        if let Some(s) = self.slot(i, j) {
            self.band[s] = v;
        }
    }

    pub fn mul_vec(&self, x: &[F]) -> Vec<F> {
        let mut y = vec![F::zero(); self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.hbw);
            for j in lo..=i {
                let a = self.get(i, j);
                y[i] += a * x[j];
                if i != j {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// In-place banded Cholesky factorization followed by a solve.
    pub fn cholesky_solve(mut self, b: &[F]) -> Result<Vec<F>, SolveError> {
        let n = self.n;
        let w = self.hbw;
        for j in 0..n {
            let lo = j.saturating_sub(w);
            let mut d = self.get(j, j);
            for k in lo..j {
                let l = self.get(j, k);
                d -= l * l;
            }
            if !(d > F::zero()) || !d.is_finite() {
                return Err(SolveError::NotPositiveDefinite(j));
            }
            let d = d.sqrt();
            self.set(j, j, d);
            let hi = (j + w).min(n - 1);
            for i in j + 1..=hi {
                let lo_i = i.saturating_sub(w).max(lo);
                let mut s = self.get(i, j);
                for k in lo_i..j {
                    s -= self.get(i, k) * self.get(j, k);
                }
                self.set(i, j, s / d);
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut s = y[i];
            for k in lo..i {
                s -= self.get(i, k) * y[k];
            }
            y[i] = s / self.get(i, i);
        }
        for i in (0..n).rev() {
            let hi = (i + w).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= self.get(k, i) * y[k];
            }
            y[i] = s / self.get(i, i);
        }
        Ok(y)
    }
}
