//! One-dimensional minimization: a coarse grid to locate the basin, then
//! golden-section refinement inside the bracketing grid cell.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// `1/φ`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`, stopping once
/// the bracket is narrower than `tol`. Returns the best point evaluated.
pub fn golden_section<E, F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Minimum, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    assert!(lo < hi, "empty bracket [{lo}, {hi}]");
    assert!(tol > 0.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evaluations = 2;
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        evaluations += 1;
    }
    let (x, value) = if fc < fd { (c, fc) } else { (d, fd) };
    Ok(Minimum {
        x,
        value,
        evaluations,
    })
}

/// Indices of local minima of a sampled curve (endpoints included when they
/// are lower than their single neighbour). Non-finite samples never qualify.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let v = values[i];
            v.is_finite()
                && (i == 0 || !(values[i - 1] < v))
                && (i + 1 == n || !(values[i + 1] < v))
        })
        .collect()
}

/// Index of the smallest finite value.
pub fn argmin(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

/// The grid cell pair around `grid[i]`, clamped to the grid ends.
pub fn bracket(grid: &[f64], i: usize) -> (f64, f64) {
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    (lo, hi)
}

/// `n` evenly spaced points `start, start + step, ...`, computed by index so
/// that rounding does not accumulate.
pub fn uniform_grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start + step * k as f64).collect()
}

/// Points `step, 2 step, ..., <= max` (the open-at-zero grids used for alpha).
pub fn open_grid(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (1..=n).map(|k| step * k as f64).collect()
}
