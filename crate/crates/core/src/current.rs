//! Probability current `J(0, t)·T` of a superposition with real
//! coefficients, as a function of `t/T`.
//!
//! With `a_l = A_l c_l`, drifts `u_l` and phases `omega_l (t/T)`, where
//! `omega_l = 4 alpha (eps_l - 1)/chi²`, the double sum factorizes:
//! `J T = 8 alpha Re(S1 conj(S0))`, `S0 = Σ a_l e^{i omega_l t/T}`,
//! `S1 = Σ a_l u_l e^{i omega_l t/T}`. This is exactly real and even in `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::ExtremalResult;
use crate::model::{ModeTable, RingParams};
use crate::par;

/// Largest `|t/T|` accepted.
pub const T_LIMIT: f64 = 0.6;
pub const DEFAULT_POINTS: usize = 1201;
/// Coefficients below this magnitude are dropped.
pub const COEFF_CUTOFF: f64 = 1e-10;
pub const MIN_WINDOW_POINTS: usize = 200;
const EDGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentTrace {
    pub params: RingParams,
    pub t_over_t: Vec<f64>,
    pub j_times_t: Vec<f64>,
    /// `cᵀ K c` of the state, i.e. the exact window integral.
    pub quadratic_form: f64,
    /// Modes kept after the coefficient cutoff.
    pub modes_used: usize,
    pub cutoff: f64,
}

/// `n` uniform points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + h * k as f64 })
        .collect()
}

/// The default `t/T` grid, `DEFAULT_POINTS` on `[-0.6, 0.6]`.
pub fn default_grid() -> Vec<f64> {
    linspace(-T_LIMIT, T_LIMIT, DEFAULT_POINTS)
}

struct Modes {
    amp: Vec<f64>,
    drift: Vec<f64>,
    omega: Vec<f64>,
    four_alpha: f64,
}

fn modes(params: &RingParams, coeffs: &[f64], cutoff: f64) -> Modes {
    let n = coeffs.len();
    let table = ModeTable::new(*params, n.saturating_sub(1));
    let four_alpha = 4.0 * params.alpha();
    let mut m = Modes {
        amp: Vec::new(),
        drift: Vec::new(),
        omega: Vec::new(),
        four_alpha,
    };
    for (k, &c) in coeffs.iter().enumerate() {
        if c.abs() < cutoff {
            continue;
        }
        m.amp.push(table.norm[k] * c);
        m.drift.push(table.drift[k]);
        // eps - 1 = chi² q / (1 + eps).
        m.omega.push(four_alpha * table.angular[k] / (1.0 + table.eps[k]));
    }
    m
}

fn current_at(m: &Modes, tau: f64) -> f64 {
    let (mut s0r, mut s0i, mut s1r, mut s1i) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..m.amp.len() {
        let (s, c) = (m.omega[k] * tau).sin_cos();
        let a = m.amp[k];
        let au = a * m.drift[k];
        s0r += a * c;
        s0i += a * s;
        s1r += au * c;
        s1i += au * s;
    }
    2.0 * m.four_alpha * (s1r * s0r + s1i * s0i)
}

/// `J(0, t)·T` on `grid` for the state with coefficients `coeffs` on modes
/// `first_mode ..`.
pub fn current_from_coeffs(params: &RingParams, coeffs: &[f64], grid: &[f64]) -> Result<CurrentTrace> {
    if coeffs.is_empty() {
        return Err(Error::InvalidArgument("no coefficients".into()));
    }
    if let Some(&t) = grid.iter().find(|t| !(t.abs() <= T_LIMIT)) {
        return Err(Error::GridOutOfRange(t));
    }
    let m = modes(params, coeffs, COEFF_CUTOFF);
    let j_times_t = par::map_slice(grid, |&t| current_at(&m, t));
    let table = ModeTable::new(*params, coeffs.len() - 1);
    let kernel = crate::kernel::kernel_from_table(&table);
    Ok(CurrentTrace {
        params: *params,
        t_over_t: grid.to_vec(),
        j_times_t,
        quadratic_form: kernel.probability(coeffs),
        modes_used: m.amp.len(),
        cutoff: COEFF_CUTOFF,
    })
}

/// Current of the minimizing state of an infimum computation.
pub fn current_trace(result: &ExtremalResult, grid: &[f64]) -> Result<CurrentTrace> {
    current_from_coeffs(&result.params, &result.best_vector, grid)
}

/// Trapezoidal integral of the trace over `t/T ∈ [-1/2, 1/2]`.
pub fn window_integral(trace: &CurrentTrace) -> Result<f64> {
    let inside: Vec<(f64, f64)> = trace
        .t_over_t
        .iter()
        .zip(&trace.j_times_t)
        .filter(|(t, _)| t.abs() <= 0.5 + EDGE_TOL)
        .map(|(t, j)| (*t, *j))
        .collect();
    let covered = inside.len() >= MIN_WINDOW_POINTS
        && (inside[0].0 + 0.5).abs() <= EDGE_TOL
        && (inside[inside.len() - 1].0 - 0.5).abs() <= EDGE_TOL;
    if !covered {
        return Err(Error::InsufficientCoverage {
            need: MIN_WINDOW_POINTS,
        });
    }
    Ok(inside
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum())
}

/// `n` points on `[centre - half_width, centre + half_width]`.
pub fn zoom_grid(centre: f64, half_width: f64, n: usize) -> Vec<f64> {
    linspace(centre - half_width, centre + half_width, n)
}

/// The fine grid around the lower window edge.
pub fn edge_zoom_grid() -> Vec<f64> {
    zoom_grid(-0.5, 0.005, 10_001)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Increment across the crossing over the larger neighbouring increment.
    pub jump_ratio: f64,
}

/// Sign changes of the trace with the size of the step across each, relative
/// to the adjacent steps. A continuous crossing on a fine grid has a ratio
/// near one.
pub fn crossings(trace: &CurrentTrace) -> Vec<Crossing> {
    let j = &trace.j_times_t;
    let step = |i: usize| (j[i + 1] - j[i]).abs();
    sign_changes(trace)
        .into_iter()
        .map(|(i, k)| {
            let mut neighbour = 0.0f64;
            if i > 0 {
                neighbour = neighbour.max(step(i - 1));
            }
            if k + 1 < j.len() {
                neighbour = neighbour.max(step(k));
            }
            Crossing {
                t_lo: trace.t_over_t[i],
                t_hi: trace.t_over_t[k],
                jump_ratio: if neighbour > 0.0 { step(i) / neighbour } else { f64::INFINITY },
            }
        })
        .collect()
}

/// Index pairs `(i, i + 1)` across which the trace changes sign.
pub fn sign_changes(trace: &CurrentTrace) -> Vec<(usize, usize)> {
    trace
        .j_times_t
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] > 0.0) != (w[1] > 0.0))
        .map(|(i, _)| (i, i + 1))
        .collect()
}
