//! Smallest eigenpair of a dense real symmetric matrix.
//!
//! Small matrices go through a full Householder tridiagonalization followed
//! by implicit QL iteration. Larger ones use Lanczos with full
//! reorthogonalization and explicit restarts: the flux kernels have a bounded,
//! numerically low-rank spectrum, so the extremal pair converges in a few
//! dozen matrix-vector products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, norm2, SymMatrix};

/// Relative asymmetry accepted on input.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Matrices up to this size are solved densely.
pub const DENSE_LIMIT: usize = 96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    /// Unit vector; its entry of largest magnitude is positive.
    pub vector: Vec<f64>,
    /// `‖A v - value v‖₂`.
    pub residual: f64,
    /// Matrix-vector products spent (zero on the dense path).
    pub matvecs: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Krylov basis size before an explicit restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Residual target relative to `‖A‖_F`.
    pub rel_tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_basis: 240,
            max_restarts: 60,
            rel_tol: 1e-11,
        }
    }
}

/// Algebraically smallest eigenvalue and a unit eigenvector.
pub fn min_eigpair(a: &SymMatrix) -> Result<EigenPair> {
    validate(a)?;
    if a.dim() <= DENSE_LIMIT {
        dense_min(a)
    } else {
        lanczos_min(a, &LanczosOptions::default())
    }
}

fn validate(a: &SymMatrix) -> Result<()> {
    if a.dim() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if a.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    a.check_symmetric(SYMMETRY_TOL)
}

/// Full eigendecomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` belongs to `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Dense eigendecomposition (Householder tridiagonalization + implicit QL).
pub fn symmetric_eigen(a: &SymMatrix) -> Result<SymmetricEigen> {
    validate(a)?;
    let n = a.dim();
    let mut v = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    ql_implicit(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|r| v[r * n + k]).collect())
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

fn dense_min(a: &SymMatrix) -> Result<EigenPair> {
    let eig = symmetric_eigen(a)?;
    let mut vector = eig.vectors.into_iter().next().expect("n >= 1");
    normalize_sign(&mut vector);
    let value = eig.values[0];
    let residual = residual_norm(a, value, &vector);
    Ok(EigenPair {
        value,
        vector,
        residual,
        matvecs: 0,
    })
}

fn residual_norm(a: &SymMatrix, value: f64, v: &[f64]) -> f64 {
    let mut r = a.matvec(v);
    axpy(-value, v, &mut r);
    norm2(&r)
}

/// Flips `v` so that its entry of largest magnitude is positive.
pub fn normalize_sign(v: &mut [f64]) {
    let mut big = 0.0f64;
    for &x in v.iter() {
        if x.abs() > big.abs() {
            big = x;
        }
    }
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Deterministic start vector with positive, non-uniform entries.
fn start_vector(n: usize) -> Vec<f64> {
    const PHI: f64 = 0.618_033_988_749_894_9;
    let mut v: Vec<f64> = (0..n)
        .map(|i| 0.5 + ((i as f64 + 1.0) * PHI).fract())
        .collect();
    let s = norm2(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Lanczos iteration for the smallest eigenpair.
pub fn lanczos_min(a: &SymMatrix, opts: &LanczosOptions) -> Result<EigenPair> {
    validate(a)?;
    let n = a.dim();
    let fro = a.frobenius_norm();
    if fro == 0.0 {
        let mut vector = vec![0.0; n];
        vector[0] = 1.0;
        return Ok(EigenPair {
            value: 0.0,
            vector,
            residual: 0.0,
            matvecs: 0,
        });
    }
    let target = opts.rel_tol * fro;
    let basis_cap = opts.max_basis.min(n).max(2);
    let breakdown = 1e-13 * fro;

    let mut start = start_vector(n);
    let mut matvecs = 0usize;
    let mut last_residual = f64::INFINITY;
    let mut w = vec![0.0; n];

    for _restart in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut diag: Vec<f64> = Vec::new();
        let mut off: Vec<f64> = Vec::new();

        loop {
            let j = basis.len() - 1;
            a.matvec_into(&basis[j], &mut w);
            matvecs += 1;
            let alpha = dot(&basis[j], &w);
            axpy(-alpha, &basis[j], &mut w);
            if j > 0 {
                axpy(-off[j - 1], &basis[j - 1], &mut w);
            }
            // Two passes of classical Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                let coeffs: Vec<f64> = basis.iter().map(|q| dot(q, &w)).collect();
                for (q, c) in basis.iter().zip(&coeffs) {
                    axpy(-c, q, &mut w);
                }
            }
            let beta = norm2(&w);
            diag.push(alpha);
            let m = diag.len();

            let full = m >= basis_cap;
            let exhausted = beta <= breakdown;
            if m % 4 == 0 || full || exhausted {
                let (theta, s) = tridiagonal_min(&diag, &off);
                let estimate = beta * s[m - 1].abs();
                if estimate <= 0.5 * target || full || exhausted {
                    let mut y = vec![0.0; n];
                    for (q, c) in basis.iter().zip(&s) {
                        axpy(*c, q, &mut y);
                    }
                    let ny = norm2(&y);
                    y.iter_mut().for_each(|x| *x /= ny);
                    let ay = a.matvec(&y);
                    matvecs += 1;
                    let value = dot(&y, &ay);
                    let mut r = ay;
                    axpy(-value, &y, &mut r);
                    let residual = norm2(&r);
                    last_residual = residual;
                    log::trace!(
                        "lanczos n={n} basis={m} theta={theta:e} rq={value:e} residual={residual:e}"
                    );
                    if residual <= target {
                        normalize_sign(&mut y);
                        return Ok(EigenPair {
                            value,
                            vector: y,
                            residual,
                            matvecs,
                        });
                    }
                    start = y;
                    break;
                }
            }
            off.push(beta);
            let inv = 1.0 / beta;
            basis.push(w.iter().map(|x| x * inv).collect());
        }
    }
    Err(Error::NoConvergence {
        iterations: matvecs,
        residual: last_residual,
        target,
    })
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..diag.len() {
        let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        d = diag[i] - x - b2 / d;
        if d == 0.0 {
            d = -f64::EPSILON * (diag[i].abs() + x.abs() + f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenpair of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (bisection + inverse iteration).
pub fn tridiagonal_min(diag: &[f64], off: &[f64]) -> (f64, Vec<f64>) {
    let m = diag.len();
    assert_eq!(off.len() + 1, m);
    if m == 1 {
        return (diag[0], vec![1.0]);
    }
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < m { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    lo -= 1e-12 * span;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * (lo.abs().max(hi.abs())) {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);

    // Inverse iteration on (T - shift I) with a shift nudged below theta.
    let shift = theta - 4.0 * f64::EPSILON * span.max(theta.abs());
    let mut x = vec![1.0; m];
    for _ in 0..3 {
        x = tridiagonal_solve(diag, off, shift, &x);
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
    }
    (theta, x)
}

/// Solves `(T - shift I) x = rhs` by Gaussian elimination with partial pivoting.
fn tridiagonal_solve(diag: &[f64], off: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    // Row k holds up to three nonzeros after pivoting: u0 (diag), u1, u2.
    let mut u0 = vec![0.0; m];
    let mut u1 = vec![0.0; m];
    let mut u2 = vec![0.0; m];
    let mut b = rhs.to_vec();
    // Current row being reduced: (a, c, 0) at columns (k, k+1, k+2).
    let tiny = f64::EPSILON * diag.iter().fold(0.0f64, |s, d| s.max(d.abs())).max(1e-300);
    let mut cur_a = diag[0] - shift;
    let mut cur_c = if m > 1 { off[0] } else { 0.0 };
    let mut cur_b = b[0];
    for k in 0..m {
        if k + 1 == m {
            u0[k] = if cur_a.abs() < tiny { tiny } else { cur_a };
            b[k] = cur_b;
            break;
        }
        // Next row: (sub, diag, super) at columns (k, k+1, k+2).
        let sub = off[k];
        let nd = diag[k + 1] - shift;
        let sup = if k + 2 < m { off[k + 1] } else { 0.0 };
        let nb = b[k + 1];
        if cur_a.abs() >= sub.abs() {
            let piv = if cur_a.abs() < tiny { tiny } else { cur_a };
            let f = sub / piv;
            u0[k] = piv;
            u1[k] = cur_c;
            u2[k] = 0.0;
            b[k] = cur_b;
            cur_a = nd - f * cur_c;
            cur_c = sup;
            cur_b = nb - f * cur_b;
        } else {
            let f = cur_a / sub;
            u0[k] = sub;
            u1[k] = nd;
            u2[k] = sup;
            b[k] = nb;
            cur_a = cur_c - f * nd;
            cur_c = -f * sup;
            cur_b -= f * nb;
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let mut s = b[k];
        if k + 1 < m {
            s -= u1[k] * x[k + 1];
        }
        if k + 2 < m {
            s -= u2[k] * x[k + 2];
        }
        x[k] = s / u0[k];
    }
    x
}

/// Householder reduction of the row-major symmetric `v` to tridiagonal form.
/// On return `d` holds the diagonal, `e[1..]` the sub-diagonal and `v` the
/// accumulated orthogonal transformation.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iteration on the tridiagonal form, accumulating into `v`.
fn ql_implicit(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let at = |r: usize, c: usize| r * n + c;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    let max_sweeps = 50 * n.max(1);
    let mut sweeps = 0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::NoConvergence {
                        iterations: sweeps,
                        residual: e[l].abs(),
                        target: eps * tst1,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two(a: f64, b: f64, c: f64) -> SymMatrix {
        SymMatrix::from_rows(&[vec![a, c], vec![c, b]]).unwrap()
    }

    #[test]
    fn closed_form_2x2() {
        for &(a, b, c) in &[(1.0, 2.0, 0.5), (-0.3, 0.7, -1.1), (2.0, 2.0, 0.0), (0.0, 5.0, 1e-9)] {
            let got = min_eigpair(&two_by_two(a, b, c)).unwrap();
            let want = (a + b) / 2.0 - (((a - b) / 2.0).powi(2) + c * c).sqrt();
            assert!((got.value - want).abs() < 1e-14, "{a} {b} {c}");
            assert!((norm2(&got.vector) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_both_paths() {
        for n in [1, 5, 40, 150, 400] {
            let id = SymMatrix::identity(n);
            let p = min_eigpair(&id).unwrap();
            assert!((p.value - 1.0).abs() < 1e-15);
            assert!(p.residual < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 1.0]]).unwrap();
        assert!(matches!(min_eigpair(&m), Err(Error::NotSymmetric { .. })));
        assert!(min_eigpair(&SymMatrix::zeros(0)).is_err());
        let nan = SymMatrix::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(min_eigpair(&nan).is_err());
    }

    #[test]
    fn sign_convention() {
        let p = min_eigpair(&two_by_two(1.0, 1.0, 0.9)).unwrap();
        let big = p.vector.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        assert!(big > 0.0);
    }

    #[test]
    fn tridiagonal_min_small() {
        // [[2,-1,0],[-1,2,-1],[0,-1,2]] has smallest eigenvalue 2 - sqrt(2).
        let (theta, v) = tridiagonal_min(&[2.0, 2.0, 2.0], &[-1.0, -1.0]);
        assert!((theta - (2.0 - 2f64.sqrt())).abs() < 1e-14);
        let s = 1.0 / 2.0;
        let want = [s, s * 2f64.sqrt(), s];
        let sign = v[1].signum();
        for k in 0..3 {
            assert!((sign * v[k] - want[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_and_lanczos_agree_on_hilbert_like() {
        let n = 200;
        let m = SymMatrix::from_upper_fn(n, |i, j| {
            let s = if (i + j) % 3 == 0 { -1.0 } else { 1.0 };
            s / (1.0 + i as f64 + j as f64)
        });
        let dense = symmetric_eigen(&m).unwrap();
        let lz = lanczos_min(&m, &LanczosOptions::default()).unwrap();
        assert!((dense.values[0] - lz.value).abs() < 1e-12);
        assert!(lz.residual <= 1e-9 * m.frobenius_norm());
    }
}
