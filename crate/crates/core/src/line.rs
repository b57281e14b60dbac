//! The infinite-radius limit: backflow on a line as the integral eigenvalue
//! problem `∫₀^∞ k(z, z') f(z') dz' = λ f(z)`, depending on `eps` alone.
//!
//! Discretized by Nyström quadrature on panels of equal width in `z²` (the
//! kernel oscillates in `z² - z'²`), truncated at `z_max` and symmetrized as
//! `√w_i k(z_i, z_j) √w_j`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::eig::min_eigpair;
use crate::error::{Error, Result};
use crate::extrapolate::{fit_quadratic, QuadraticFit};
use crate::kernel::sinc;
use crate::matrix::SymMatrix;
use crate::par;
use crate::quadrature::gauss_legendre;

/// Points per quadrature panel.
pub const PANEL_ORDER: usize = 6;
pub const MIN_NODES: usize = 50;
/// Change on refinement above which a result is reported as unconverged.
pub const SENSITIVITY_WARN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    eps: f64,
    z_max: f64,
    n_nodes: usize,
}

impl LineParams {
    pub fn new(eps: f64, z_max: f64, n_nodes: usize) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eps",
                value: eps,
                reason: "must be positive and finite",
            });
        }
        if !(z_max.is_finite() && z_max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "z_max",
                value: z_max,
                reason: "quadrature cutoff must be positive and finite",
            });
        }
        if n_nodes < MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "n_nodes = {n_nodes} is below the minimum {MIN_NODES}"
            )));
        }
        Ok(Self { eps, z_max, n_nodes })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn panels(&self) -> usize {
        self.n_nodes.div_ceil(PANEL_ORDER)
    }
}

/// `sqrt(1 + eps² z²)`.
#[inline]
pub fn gamma_of_z(eps: f64, z: f64) -> f64 {
    (1.0 + eps * eps * z * z).sqrt()
}

/// The symmetric line kernel. The sinc argument `(2/eps²)(γ - γ')` is
/// evaluated as `2(z² - z'²)/(γ + γ')`.
pub fn line_kernel(eps: f64, z: f64, zp: f64) -> f64 {
    let g = gamma_of_z(eps, z);
    let gp = gamma_of_z(eps, zp);
    let num = z * (gp + 1.0) + zp * (g + 1.0);
    let den = ((g * (g + 1.0)) * (gp * (gp + 1.0))).sqrt();
    num / den * sinc(2.0 * (z * z - zp * zp) / (g + gp)) / PI
}

/// Nodes and weights in `z` on `[0, z_max]`: panel edges uniform in `z²`,
/// a Gauss-Legendre rule in `z` on each panel.
pub fn line_nodes(params: &LineParams) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let panels = params.panels();
    let u_max = params.z_max * params.z_max;
    let edge = |k: usize| (u_max * k as f64 / panels as f64).sqrt();
    let mut z = Vec::with_capacity(panels * PANEL_ORDER);
    let mut w = Vec::with_capacity(panels * PANEL_ORDER);
    for k in 0..panels {
        let (a, b) = (edge(k), edge(k + 1));
        for (x, wx) in gx.iter().zip(&gw) {
            z.push(0.5 * (a + b) + 0.5 * (b - a) * x);
            w.push(0.5 * (b - a) * wx);
        }
    }
    (z, w)
}

/// The symmetrized Nyström matrix.
pub fn line_matrix(params: &LineParams) -> SymMatrix {
    let (z, w) = line_nodes(params);
    let sw: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
    let eps = params.eps;
    SymMatrix::from_upper_fn(z.len(), |i, j| sw[i] * line_kernel(eps, z[i], z[j]) * sw[j])
}

/// Smallest eigenvalue of the discretized operator at one cutoff.
pub fn line_eigenvalue(params: &LineParams) -> Result<f64> {
    Ok(min_eigpair(&line_matrix(params))?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineResult {
    pub params: LineParams,
    pub lambda_min: f64,
    /// Change when the node count is doubled.
    pub node_change: f64,
    /// Change when `z_max` is doubled at fixed node density in `z²`.
    pub cutoff_change: f64,
}

impl LineResult {
    pub fn converged(&self) -> bool {
        self.node_change.abs() <= SENSITIVITY_WARN && self.cutoff_change.abs() <= SENSITIVITY_WARN
    }
}

/// Smallest eigenvalue plus its sensitivity to doubling the node count and
/// the cutoff; warns when either moves it by more than [`SENSITIVITY_WARN`].
pub fn line_min_eig(params: &LineParams) -> Result<LineResult> {
    let finer = LineParams::new(params.eps, params.z_max, 2 * params.n_nodes)?;
    let wider = LineParams::new(params.eps, 2.0 * params.z_max, 4 * params.n_nodes)?;
    let vals = par::map_slice(&[*params, finer, wider], line_eigenvalue)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let r = LineResult {
        params: *params,
        lambda_min: vals[0],
        node_change: vals[1] - vals[0],
        cutoff_change: vals[2] - vals[0],
    };
    if !r.converged() {
        log::warn!(
            "line eigenvalue at eps = {} not converged: node change {:e}, cutoff change {:e}",
            params.eps,
            r.node_change,
            r.cutoff_change
        );
    }
    Ok(r)
}

/// Cutoff multipliers of the extrapolation ladder.
pub const CUTOFF_LADDER: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineExtrapolation {
    pub eps: f64,
    /// Estimate of the eigenvalue as `z_max -> ∞`.
    pub value: f64,
    /// Quadratic in `1/z_max`.
    pub fit: QuadraticFit,
    /// `(z_max, nodes, lambda_min)` along the ladder.
    pub points: Vec<(f64, usize, f64)>,
}

/// Removes the slow cutoff dependence: solves on `z_max · CUTOFF_LADDER`
/// with the node count scaled to keep the density in `z²`, then fits a
/// quadratic in `1/z_max` and reads it off at zero.
pub fn line_infimum(base: &LineParams) -> Result<LineExtrapolation> {
    let ladder = CUTOFF_LADDER
        .iter()
        .map(|f| {
            let n = (base.n_nodes as f64 * f * f).round() as usize;
            LineParams::new(base.eps, base.z_max * f, n)
        })
        .collect::<Result<Vec<_>>>()?;
    let vals = par::map_slice(&ladder, line_eigenvalue)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let xy: Vec<(f64, f64)> = ladder.iter().zip(&vals).map(|(p, v)| (1.0 / p.z_max, *v)).collect();
    let fit = fit_quadratic(&xy)?;
    Ok(LineExtrapolation {
        eps: base.eps,
        value: fit.coeffs[0],
        fit,
        points: ladder
            .iter()
            .zip(&vals)
            .map(|(p, v)| (p.z_max, p.panels() * PANEL_ORDER, *v))
            .collect(),
    })
}

/// Ring `chi` whose small-`alpha` limit corresponds to line parameter `eps`:
/// `eps = chi / (2 sqrt(alpha))`.
pub fn ring_chi_for_line(eps: f64, alpha: f64) -> f64 {
    2.0 * eps * alpha.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_of_z(0.3, 0.0), 1.0);
        assert!((gamma_of_z(1.0, 1.0) - 2f64.sqrt()).abs() < 1e-15);
        let (e, z) = (1e-3, 2.0);
        assert!((gamma_of_z(e, z) - (1.0 + e * e * z * z / 2.0)).abs() < 1e-11);
    }

    #[test]
    fn kernel_diagonal_and_symmetry() {
        for &(e, z) in &[(0.01, 3.0), (0.5, 1.7), (2.0, 0.2)] {
            let want = 2.0 / PI * z / gamma_of_z(e, z);
            assert!((line_kernel(e, z, z) - want).abs() < 1e-15);
            assert_eq!(line_kernel(e, z, 0.4), line_kernel(e, 0.4, z));
        }
    }

    #[test]
    fn kernel_small_eps_limit() {
        let (z, zp) = (2.3, 1.1);
        let nonrel = (z + zp) * sinc(z * z - zp * zp) / PI;
        let mut prev = f64::INFINITY;
        for &e in &[1e-1, 1e-2, 1e-3] {
            let d = (line_kernel(e, z, zp) - nonrel).abs();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn stabilized_argument_matches_raw_form() {
        let (e, z, zp) = (0.3f64, 2.0f64, 1.5f64);
        let (g, gp) = (gamma_of_z(e, z), gamma_of_z(e, zp));
        let raw = 2.0 / (e * e) * (g - gp);
        assert!((2.0 * (z * z - zp * zp) / (g + gp) - raw).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LineParams::new(0.0, 20.0, 400).is_err());
        assert!(LineParams::new(0.01, -1.0, 400).is_err());
        assert!(LineParams::new(0.01, 20.0, 49).is_err());
    }

    #[test]
    fn weights_integrate_on_z() {
        let p = LineParams::new(0.01, 5.0, 200).unwrap();
        let (z, w) = line_nodes(&p);
        let q: f64 = z.iter().zip(&w).map(|(z, w)| w * z).sum();
        assert!((q - 12.5).abs() < 1e-12);
        let q: f64 = z.iter().zip(&w).map(|(z, w)| w * z.powi(9)).sum();
        assert!((q - 5f64.powi(10) / 10.0).abs() < 1e-12 * 5f64.powi(10));
    }
}
