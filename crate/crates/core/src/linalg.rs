//! Dense symmetric matrices and Cholesky factors.
//!
//! The factorization is hand-rolled on a row-major buffer because the
//! correlated logit update factors a fresh p x p precision every sweep and
//! that loop dominates runtime.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Lower-triangular factor `L` with `A = L Lᵀ`, stored row-major.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a row-major symmetric matrix. Only the lower triangle is read.
    /// On failure returns the index of the first non-positive pivot.
    pub fn factor(a: &[f64], n: usize) -> std::result::Result<Self, usize> {
        assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            let (done, rest) = l.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..i {
                let row_j = &done[j * n..j * n + n];
                let s = dot(&row_i[..j], &row_j[..j]);
                row_i[j] = (a[i * n + j] - s) / row_j[j];
            }
            let d = a[i * n + i] - dot(&row_i[..i], &row_i[..i]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(i);
            }
            row_i[i] = d.sqrt();
        }
        Ok(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = dot(row, &b[..i]);
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn solve_upper_in_place(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let xi = y[i] / self.l[i * n + i];
            y[i] = xi;
            let row = &self.l[i * n..i * n + i];
            for (yk, lik) in y[..i].iter_mut().zip(row) {
                *yk -= lik * xi;
            }
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.solve_lower_in_place(b);
        self.solve_upper_in_place(b);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| dot(&self.l[i * n..i * n + i + 1], &z[..=i]))
            .collect()
    }

    /// `xᵀ A⁻¹ x`.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        self.solve_lower_in_place(&mut y);
        dot(&y, &y)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n)
            .map(|i| self.l[i * self.n + i].ln())
            .sum::<f64>()
    }

    /// Dense `A⁻¹`, row-major, exactly symmetric.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            self.solve_in_place(&mut e);
            for r in 0..n {
                inv[r * n + c] = e[r];
            }
        }
        symmetrize_row_major(&mut inv, n);
        inv
    }
}

pub(crate) fn symmetrize_row_major(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
}

/// Dense symmetric matrix. Symmetry is exact; a Cholesky factor is computed
/// on first use and cached, which doubles as the positive-definiteness
/// certificate.
#[derive(Clone, Debug)]
pub struct SymmetricMatrix {
    data: DMatrix<f64>,
    factor: OnceLock<Option<Cholesky>>,
}

impl PartialEq for SymmetricMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl SymmetricMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        let n = data.nrows();
        for i in 0..n {
            for j in 0..i {
                if data[(i, j)].to_bits() != data[(j, i)].to_bits() {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(SymmetricMatrix {
            data,
            factor: OnceLock::new(),
        })
    }

    /// Builds from an upper-triangle generator `f(i, j)`, `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        SymmetricMatrix {
            data,
            factor: OnceLock::new(),
        }
    }

    /// Averages `a` with its transpose.
    pub fn symmetrized(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension("expected a square matrix".into()));
        }
        let n = a.nrows();
        Ok(Self::from_fn(n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)])))
    }

    pub fn from_row_major(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, values))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_fn(n, |_, _| 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_fn(self.dim(), |i, j| s * self.data[(i, j)])
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        // column-major storage of a symmetric matrix is its row-major form
        self.data.as_slice().to_vec()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)]).collect()
    }

    /// Cached Cholesky factor; errors with the smallest eigenvalue when the
    /// matrix is not positive definite.
    pub fn cholesky(&self) -> Result<&Cholesky> {
        let f = self
            .factor
            .get_or_init(|| Cholesky::factor(self.data.as_slice(), self.dim()).ok());
        f.as_ref().ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: self.min_eigenvalue(),
        })
    }

    /// True once a successful factorization is attached.
    pub fn has_pd_certificate(&self) -> bool {
        matches!(self.factor.get(), Some(Some(_)))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let e = SymmetricEigen::new(self.data.clone());
        (e.eigenvalues, e.eigenvectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return f64::INFINITY;
        }
        SymmetricEigen::new(self.data.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn inverse(&self) -> Result<SymmetricMatrix> {
        let inv = self.cholesky()?.inverse();
        SymmetricMatrix::from_row_major(self.dim(), &inv)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let s = self.data.as_slice();
        (0..n).map(|i| dot(&s[i * n..i * n + n], x)).collect()
    }

    pub fn frobenius_distance(&self, other: &SymmetricMatrix) -> f64 {
        (&self.data - &other.data).norm()
    }
}
