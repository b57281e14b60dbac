//! Dense real symmetric matrices stored as full row-major arrays.

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps a row-major `n x n` array. Symmetry is checked by the consumers
    /// that depend on it, not here.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::NotSquare {
                rows: n,
                cols: data.len().checked_div(n).unwrap_or(data.len()),
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::NotSquare { rows: n, cols: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    /// Builds the matrix from `f(i, j)` evaluated once per unordered pair
    /// (`i <= j`) and mirrored, so the result is exactly symmetric.
    pub fn from_upper_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        // Upper rows first, then assemble each full row from them.
        let upper: Vec<Vec<f64>> = par::map_range(n, |i| (i..n).map(|j| f(i, j)).collect());
        let mut data = vec![0.0; n * n];
        par::for_each_row(&mut data, n, |i, row| {
            for (j, x) in row.iter_mut().enumerate().take(i) {
                *x = upper[j][i - j];
            }
            row[i..].copy_from_slice(&upper[i]);
        });
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Leading principal `(m x m)` block.
    pub fn leading_block(&self, m: usize) -> SymMatrix {
        assert!(m <= self.n);
        self.sub_matrix(&(0..m).collect::<Vec<_>>())
    }

    /// Principal sub-matrix on the given indices.
    pub fn sub_matrix(&self, idx: &[usize]) -> SymMatrix {
        let m = idx.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        SymMatrix { n: m, data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Errors unless symmetric to `rel_tol` relative to the largest entry.
    pub fn check_symmetric(&self, rel_tol: f64) -> Result<()> {
        let scale = self.max_abs();
        let asym = self.max_asymmetry();
        if asym > rel_tol * scale {
            return Err(Error::NotSymmetric {
                max_asymmetry: asym,
                scale,
            });
        }
        Ok(())
    }

    /// `y = A x`. Each row is reduced sequentially, so the result does not
    /// depend on how rows are distributed over workers.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let n = self.n;
        par::for_each_mut(y, |i, yi| *yi = dot(&self.data[i * n..(i + 1) * n], x));
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four partial sums; fixed order keeps this deterministic.
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += c x`.
#[inline]
pub fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}
