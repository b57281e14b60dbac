//! Dimensionless spectrum, normalization and single-mode currents of the
//! Dirac fermion on a ring.
//!
//! Everything is expressed through three knobs: `chi = λ_C / R` (reduced
//! Compton wavelength over radius), the flux parameter `beta` and the window
//! parameter `alpha = ħT / (4 m R²)`. Energies are in units of `mc²`, the
//! normalization constants carry their `1/√(2π)` factor and fluxes are
//! time-integrated over the window (`J·T`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1/√(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingParams {
    chi: f64,
    beta: f64,
    alpha: f64,
}

impl RingParams {
    /// Parameters on the fundamental domain `chi > 0`, `alpha > 0`,
    /// `-1 < beta <= 0`.
    pub fn new(chi: f64, beta: f64, alpha: f64) -> Result<Self> {
        let p = Self::unreduced(chi, beta, alpha)?;
        if !(beta > -1.0 && beta <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must lie in the fundamental domain (-1, 0]; the spectrum is invariant \
                         under beta -> beta - 1 with l -> l - 1, so any flux reduces to this interval",
            });
        }
        Ok(p)
    }

    /// Same as [`RingParams::new`] with the window given as `alpha / pi`.
    pub fn from_alpha_over_pi(chi: f64, beta: f64, alpha_over_pi: f64) -> Result<Self> {
        Self::new(chi, beta, alpha_over_pi * std::f64::consts::PI)
    }

    /// Parameters with an arbitrary finite `beta`. Only useful for exercising
    /// the flux-shift symmetry; all physics entry points take reduced params.
    pub fn unreduced(chi: f64, beta: f64, alpha: f64) -> Result<Self> {
        if !(chi.is_finite() && chi > 0.0) {
            return Err(Error::InvalidParameter {
                name: "chi",
                value: chi,
                reason: "lambda_C / R must be positive and finite",
            });
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "the time-window parameter must be positive and finite",
            });
        }
        if !beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be finite",
            });
        }
        Ok(Self { chi, beta, alpha })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_over_pi(&self) -> f64 {
        self.alpha / std::f64::consts::PI
    }

    /// Lowest admissible angular index, `ceil(beta)`; zero on the fundamental domain.
    pub fn first_mode(&self) -> i64 {
        self.beta.ceil() as i64
    }

    pub fn is_reduced(&self) -> bool {
        self.beta > -1.0 && self.beta <= 0.0
    }

    /// Maps `beta` into `(-1, 0]`. Returns the reduced parameters and the
    /// integer `k` with `beta = beta_reduced + k`; mode `l` of the original
    /// problem is mode `l - k` of the reduced one.
    pub fn reduce(&self) -> (Self, i64) {
        let k = self.beta.ceil();
        let reduced = Self {
            beta: self.beta - k,
            ..*self
        };
        (reduced, k as i64)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::unreduced(self.chi, self.beta, alpha)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.chi, beta, self.alpha)
    }
}

/// `(l - beta)(l - beta + 1)`, the angular factor of the spectrum.
#[inline]
pub fn angular_factor(beta: f64, l: i64) -> f64 {
    let m = l as f64 - beta;
    m * (m + 1.0)
}

/// Dimensionless positive-branch energy `E_l / mc² = √(1 + chi² (l-β)(l-β+1))`.
///
/// Defined for any integer `l`; negative indices are only meaningful for the
/// degeneracy `eps_l = eps_{-l-1}`.
pub fn epsilon(params: &RingParams, l: i64) -> f64 {
    let chi = params.chi;
    (1.0 + chi * chi * angular_factor(params.beta, l)).sqrt()
}

/// Normalization constant `A_l` including the `1/√(2π)` factor.
pub fn norm_const(params: &RingParams, l: i64) -> f64 {
    let eps = epsilon(params, l);
    norm_from_eps(params.chi, l as f64 - params.beta, eps)
}

#[inline]
fn norm_from_eps(chi: f64, shifted_l: f64, eps: f64) -> f64 {
    let r = chi * shifted_l / (1.0 + eps);
    INV_SQRT_2PI / (1.0 + r * r).sqrt()
}

/// Time-integrated current `J_l·T` of a single eigenstate,
/// `8 alpha A_l² (l - beta) / (1 + eps_l)`.
pub fn eigenstate_flux(params: &RingParams, l: i64) -> f64 {
    debug_assert!(l >= params.first_mode(), "mode below ceil(beta)");
    let eps = epsilon(params, l);
    let a = norm_const(params, l);
    8.0 * params.alpha * a * a * (l as f64 - params.beta) / (1.0 + eps)
}

/// Per-mode quantities for `l = start ..= start + n_max`, computed once and
/// shared by the kernel, two-mode and current evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTable {
    params: RingParams,
    start: i64,
    n_max: usize,
    /// `eps_l`.
    pub eps: Vec<f64>,
    /// `A_l`.
    pub norm: Vec<f64>,
    /// `(l - beta)(l - beta + 1)`.
    pub angular: Vec<f64>,
    /// `(l - beta) / (1 + eps_l)`.
    pub drift: Vec<f64>,
}

impl ModeTable {
    /// Modes `ceil(beta) ..= ceil(beta) + n_max`.
    pub fn new(params: RingParams, n_max: usize) -> Self {
        Self::with_start(params, params.first_mode(), n_max)
    }

    /// Modes `start ..= start + n_max`. Starting below `ceil(beta)` includes
    /// states with negative current.
    pub fn with_start(params: RingParams, start: i64, n_max: usize) -> Self {
        let len = n_max + 1;
        let mut eps = Vec::with_capacity(len);
        let mut norm = Vec::with_capacity(len);
        let mut angular = Vec::with_capacity(len);
        let mut drift = Vec::with_capacity(len);
        for k in 0..len {
            let l = start + k as i64;
            let m = l as f64 - params.beta;
            let q = angular_factor(params.beta, l);
            let e = (1.0 + params.chi * params.chi * q).sqrt();
            eps.push(e);
            norm.push(norm_from_eps(params.chi, m, e));
            angular.push(q);
            drift.push(m / (1.0 + e));
        }
        Self {
            params,
            start,
            n_max,
            eps,
            norm,
            angular,
            drift,
        }
    }

    pub fn params(&self) -> &RingParams {
        &self.params
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.n_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Angular index of row `k`.
    pub fn mode(&self, k: usize) -> i64 {
        self.start + k as i64
    }

    /// `J_l·T` for row `k`; identical to [`eigenstate_flux`] at `mode(k)`.
    pub fn flux(&self, k: usize) -> f64 {
        let a = self.norm[k];
        8.0 * self.params.alpha * a * a * (self.mode(k) as f64 - self.params.beta)
            / (1.0 + self.eps[k])
    }
}
