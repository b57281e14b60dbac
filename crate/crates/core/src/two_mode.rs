//! Closed-form backflow for superpositions of two eigenstates,
//! `c = (cos(phi/2), e^{i gamma} sin(phi/2))` on modes `l1 < l2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{sinc, sinc_argument};
use crate::model::{angular_factor, epsilon, norm_const, RingParams};
use crate::search::{self, golden_section};

/// The coefficients of `P = (alpha/pi)[A - B cos phi + C sinc(D) cos gamma sin phi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub l1: i64,
    pub l2: i64,
}

impl TwoModeCoeffs {
    /// `sqrt(B² + C² sinc²(D))`.
    pub fn mixing(&self) -> f64 {
        self.b.hypot(self.c * sinc(self.d))
    }
}

/// `4 pi A_l² (l - beta) / (1 + eps_l)`, so that `(alpha/pi) a_l` is half the
/// single-mode flux.
fn half_flux_weight(p: &RingParams, l: i64) -> f64 {
    let a = norm_const(p, l);
    4.0 * PI * a * a * (l as f64 - p.beta()) / (1.0 + epsilon(p, l))
}

fn check_modes(p: &RingParams, l1: i64, l2: i64) -> Result<()> {
    let first = p.first_mode();
    if l1 < first || l1 >= l2 {
        return Err(Error::InvalidArgument(format!(
            "two-mode indices need {first} <= l1 < l2, got l1 = {l1}, l2 = {l2}"
        )));
    }
    Ok(())
}

pub fn two_mode_coeffs(params: &RingParams, l1: i64, l2: i64) -> Result<TwoModeCoeffs> {
    check_modes(params, l1, l2)?;
    let w1 = half_flux_weight(params, l1);
    let w2 = half_flux_weight(params, l2);
    let (n1, n2) = (norm_const(params, l1), norm_const(params, l2));
    let (e1, e2) = (epsilon(params, l1), epsilon(params, l2));
    let u1 = (l1 as f64 - params.beta()) / (1.0 + e1);
    let u2 = (l2 as f64 - params.beta()) / (1.0 + e2);
    let d = sinc_argument(
        params.alpha(),
        angular_factor(params.beta(), l2),
        angular_factor(params.beta(), l1),
        e2,
        e1,
    );
    Ok(TwoModeCoeffs {
        a: w1 + w2,
        b: w2 - w1,
        c: 4.0 * PI * n1 * n2 * (u1 + u2),
        d,
        l1,
        l2,
    })
}

pub fn two_mode_prob(params: &RingParams, l1: i64, l2: i64, phi: f64, gamma: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&phi) {
        return Err(Error::InvalidParameter {
            name: "phi",
            value: phi,
            reason: "mixing angle must lie in [0, pi]",
        });
    }
    if !(0.0..2.0 * PI).contains(&gamma) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "relative phase must lie in [0, 2 pi)",
        });
    }
    let k = two_mode_coeffs(params, l1, l2)?;
    Ok(params.alpha_over_pi() * (k.a - k.b * phi.cos() + k.c * sinc(k.d) * gamma.cos() * phi.sin()))
}

/// Minimum over `phi` and `gamma`: `(alpha/pi)[A - sqrt(B² + C² sinc²(D))]`.
pub fn two_mode_min(params: &RingParams, l1: i64, l2: i64) -> Result<f64> {
    let k = two_mode_coeffs(params, l1, l2)?;
    Ok(params.alpha_over_pi() * (k.a - k.mixing()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeOptimum {
    pub alpha_over_pi: f64,
    pub p_min: f64,
}

/// Coarse grid step in `alpha/pi` and the upper end of the search window.
pub const ALPHA_STEP: f64 = 0.005;
pub const ALPHA_MAX: f64 = 1.0;
const ALPHA_TOL: f64 = 1e-9;

/// Minimizes [`two_mode_min`] over `alpha/pi` in `(0, 1]` at fixed `chi`, `beta`.
pub fn optimize_alpha(chi: f64, beta: f64, l1: i64, l2: i64) -> Result<TwoModeOptimum> {
    let eval = |x: f64| two_mode_min(&RingParams::from_alpha_over_pi(chi, beta, x)?, l1, l2);
    let grid = search::open_grid(ALPHA_STEP, ALPHA_MAX);
    let values = grid.iter().map(|&x| eval(x)).collect::<Result<Vec<_>>>()?;
    let best = search::argmin(&values).expect("non-empty grid");
    let (lo, hi) = search::bracket(&grid, best);
    let m = golden_section(eval, lo, hi, ALPHA_TOL)?;
    let (x, v) = if m.value <= values[best] {
        (m.x, m.value)
    } else {
        (grid[best], values[best])
    };
    Ok(TwoModeOptimum {
        alpha_over_pi: x,
        p_min: v,
    })
}

/// [`two_mode_min`] on modes `ceil(beta) + l1`, `ceil(beta) + l2` along an
/// `alpha/pi` grid (one curve of the two-mode figure).
pub fn alpha_curve(chi: f64, beta: f64, l1: i64, l2: i64, alpha_over_pi: &[f64]) -> Result<Vec<f64>> {
    alpha_over_pi
        .iter()
        .map(|&x| {
            let p = RingParams::from_alpha_over_pi(chi, beta, x)?;
            two_mode_min(&p, p.first_mode() + l1, p.first_mode() + l2)
        })
        .collect()
}
