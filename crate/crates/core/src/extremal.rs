//! The infimum of the backflow probability over all states, `P(alpha, beta, chi)`,
//! and the searches built on it: alpha scans, the global minimum over
//! `(chi, alpha, beta)` and the large-`chi` (massless) estimates.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eig::{min_eigpair, EigenPair};
use crate::error::{Error, Result};
use crate::extrapolate::{quad_extrapolate, ExtrapolationResult, TruncationSchedule};
use crate::kernel::{build_kernel, nonrel_kernel};
use crate::model::{eigenstate_flux, RingParams};
use crate::par;
use crate::search::{self, golden_section};

/// Tag folded into every provenance hash; bump when numerics change.
pub const CODE_VERSION: &str = concat!("backflow-core/", env!("CARGO_PKG_VERSION"), "/1");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSample {
    pub n_max: usize,
    pub lambda_min: f64,
    pub residual: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalResult {
    pub params: RingParams,
    /// Extrapolated infimum.
    pub p_value: f64,
    /// Minimizing coefficients `c_l` at the largest truncation, indexed from
    /// `params.first_mode()`.
    pub best_vector: Vec<f64>,
    pub extrapolation: ExtrapolationResult,
    pub samples: Vec<TruncationSample>,
    /// An extra, larger truncation was added after a poor fit.
    pub escalated: bool,
    /// `lambda_min` did not increase along the schedule.
    pub monotone: bool,
}

impl ExtremalResult {
    /// The smallest truncated eigenvalue (the largest `N`).
    pub fn finite_n_value(&self) -> f64 {
        self.samples.last().map(|s| s.lambda_min).unwrap_or(f64::NAN)
    }
}

/// Smallest eigenpair of the kernel truncated at `n_max`.
pub fn truncated_min(params: &RingParams, n_max: usize) -> Result<EigenPair> {
    let k = build_kernel(params, n_max)?;
    min_eigpair(k.matrix())
}

fn sample_all(params: &RingParams, sizes: &[usize]) -> Result<Vec<(TruncationSample, Vec<f64>)>> {
    par::map_slice(sizes, |&n| {
        truncated_min(params, n).map(|e| {
            (
                TruncationSample {
                    n_max: n,
                    lambda_min: e.value,
                    residual: e.residual,
                    matvecs: e.matvecs,
                },
                e.vector,
            )
        })
    })
    .into_iter()
    .collect()
}

/// Truncate, solve, extrapolate in `1/N`. A fit with large residuals is
/// retried once with one more, larger truncation.
pub fn backflow_infimum(params: &RingParams, schedule: &TruncationSchedule) -> Result<ExtremalResult> {
    let mut solved = sample_all(params, schedule.sizes())?;
    let fit = |s: &[(TruncationSample, Vec<f64>)]| {
        let pts: Vec<(usize, f64)> = s.iter().map(|(t, _)| (t.n_max, t.lambda_min)).collect();
        quad_extrapolate(&pts)
    };
    let mut extrapolation = fit(&solved)?;
    let mut escalated = false;
    if extrapolation.poor_fit {
        let n = schedule.next_size();
        log::warn!("escalating truncation to N = {n} at {params:?}");
        solved.extend(sample_all(params, &[n])?);
        extrapolation = fit(&solved)?;
        escalated = true;
    }
    let samples: Vec<TruncationSample> = solved.iter().map(|(t, _)| *t).collect();
    let monotone = samples
        .windows(2)
        .all(|w| w[1].lambda_min <= w[0].lambda_min + 1e-12 * w[0].lambda_min.abs().max(1e-3));
    if !monotone {
        log::warn!("lambda_min increased along the truncation schedule at {params:?}");
    }
    let best_vector = solved.pop().map(|(_, v)| v).unwrap_or_default();
    let k00 = eigenstate_flux(params, params.first_mode());
    if extrapolation.value_at_zero > k00 {
        log::warn!(
            "extrapolated infimum {} exceeds the first diagonal entry {k00}",
            extrapolation.value_at_zero
        );
    }
    Ok(ExtremalResult {
        params: *params,
        p_value: extrapolation.value_at_zero,
        best_vector,
        extrapolation,
        samples,
        escalated,
        monotone,
    })
}

/// Knobs of the one-dimensional search over `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearch {
    /// Coarse grid step and upper end in `alpha/pi`, both multiplied by
    /// `max(1, chi)` (the optimal window grows linearly with `chi`).
    pub step: f64,
    pub max: f64,
    /// Golden-section tolerance in `alpha/pi`, also scaled.
    pub tol: f64,
    /// Truncation used to rank coarse grid points.
    pub proxy_n: usize,
    /// How many of the deepest coarse local minima are refined.
    pub candidates: usize,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        Self {
            step: 0.01,
            max: 1.5,
            tol: 1e-4,
            proxy_n: 200,
            candidates: 2,
        }
    }
}

impl AlphaSearch {
    pub fn scale(chi: f64) -> f64 {
        chi.max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptimum {
    pub alpha_over_pi: f64,
    pub result: ExtremalResult,
    pub evaluations: usize,
}

/// Coarse-grid-then-golden minimization of `eval` over `grid`: grid points
/// are ranked by the cheap `proxy`, the deepest `candidates` local minima are
/// refined with golden section to `tol`. Returns `(x, eval(x), evaluations)`.
fn minimize_ranked<P, E>(grid: &[f64], proxy: P, eval: E, tol: f64, candidates: usize) -> Result<(f64, f64, usize)>
where
    P: Fn(f64) -> Result<f64> + Sync + Send,
    E: Fn(f64) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty alpha grid".into()));
    }
    let ranked = par::map_slice(grid, |&x| proxy(x))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut minima = search::local_minima(&ranked);
    minima.sort_by(|&a, &b| ranked[a].total_cmp(&ranked[b]));
    minima.truncate(candidates.max(1));
    let mut best: Option<(f64, f64)> = None;
    let mut evaluations = grid.len();
    for i in minima {
        let (lo, hi) = search::bracket(grid, i);
        let m = golden_section(&eval, lo, hi, tol)?;
        evaluations += m.evaluations;
        if best.map_or(true, |b| m.value < b.1) {
            best = Some((m.x, m.value));
        }
    }
    let (x, v) = best.expect("at least one local minimum");
    Ok((x, v, evaluations))
}

/// Minimizes `P(alpha)` at fixed `chi`, `beta`: a coarse grid ranked with a
/// single truncation, golden-section refinement of the extrapolated infimum
/// around the best candidates.
pub fn minimize_alpha(
    chi: f64,
    beta: f64,
    schedule: &TruncationSchedule,
    opts: &AlphaSearch,
) -> Result<AlphaOptimum> {
    let s = AlphaSearch::scale(chi);
    let grid = search::open_grid(opts.step * s, opts.max * s);
    let params = |x: f64| RingParams::from_alpha_over_pi(chi, beta, x);
    let (x, _, evaluations) = minimize_ranked(
        &grid,
        |x| Ok(truncated_min(&params(x)?, opts.proxy_n)?.value),
        |x| Ok(backflow_infimum(&params(x)?, schedule)?.p_value),
        opts.tol * s,
        opts.candidates,
    )?;
    Ok(AlphaOptimum {
        alpha_over_pi: x,
        result: backflow_infimum(&params(x)?, schedule)?,
        evaluations: evaluations + 1,
    })
}

/// Golden-section minimization of the extrapolated infimum on `[lo, hi]` in
/// `alpha/pi`.
pub fn minimize_alpha_in(
    chi: f64,
    beta: f64,
    lo: f64,
    hi: f64,
    schedule: &TruncationSchedule,
    tol: f64,
) -> Result<AlphaOptimum> {
    let eval = |x: f64| backflow_infimum(&RingParams::from_alpha_over_pi(chi, beta, x)?, schedule);
    let m = golden_section(|x| eval(x).map(|r| r.p_value), lo, hi, tol)?;
    Ok(AlphaOptimum {
        alpha_over_pi: m.x,
        result: eval(m.x)?,
        evaluations: m.evaluations + 1,
    })
}

/// Extrapolated smallest eigenvalue of the `chi -> 0` kernel.
pub fn nonrel_infimum(alpha: f64, beta: f64, schedule: &TruncationSchedule) -> Result<ExtrapolationResult> {
    let samples = par::map_slice(schedule.sizes(), |&n| {
        nonrel_kernel(alpha, beta, n).and_then(|k| min_eigpair(k.matrix()).map(|e| (n, e.value)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    quad_extrapolate(&samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonrelOptimum {
    pub alpha_over_pi: f64,
    pub p_value: f64,
    pub evaluations: usize,
}

/// [`minimize_alpha`] for the `chi -> 0` kernel.
pub fn minimize_alpha_nonrel(
    beta: f64,
    schedule: &TruncationSchedule,
    opts: &AlphaSearch,
) -> Result<NonrelOptimum> {
    let grid = search::open_grid(opts.step, opts.max);
    let alpha = |x: f64| x * std::f64::consts::PI;
    let (x, v, evaluations) = minimize_ranked(
        &grid,
        |x| Ok(min_eigpair(nonrel_kernel(alpha(x), beta, opts.proxy_n)?.matrix())?.value),
        |x| Ok(nonrel_infimum(alpha(x), beta, schedule)?.value_at_zero),
        opts.tol,
        opts.candidates,
    )?;
    Ok(NonrelOptimum {
        alpha_over_pi: x,
        p_value: v,
        evaluations,
    })
}

/// Where and when a surface was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 over the axes, the schedule and [`CODE_VERSION`].
    pub config_hash: String,
    pub started_unix: f64,
    pub finished_unix: f64,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Hex SHA-256 of a serializable configuration plus [`CODE_VERSION`].
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("configuration serializes");
    let mut h = Sha256::new();
    h.update(CODE_VERSION.as_bytes());
    h.update([0]);
    h.update(&json);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub chi: f64,
    pub beta: f64,
    pub alpha_over_pi: f64,
    /// `None` when the point failed; see `error`.
    pub p_value: Option<f64>,
    pub ssr: Option<f64>,
    pub error: Option<String>,
}

/// Infima on the grid `chi x beta x alpha/pi`, stored with alpha fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSurface {
    pub chi: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha_over_pi: Vec<f64>,
    pub points: Vec<ScanPoint>,
    pub provenance: Provenance,
}

impl ScanSurface {
    pub fn get(&self, i_chi: usize, i_beta: usize, i_alpha: usize) -> &ScanPoint {
        let (nb, na) = (self.beta.len(), self.alpha_over_pi.len());
        &self.points[(i_chi * nb + i_beta) * na + i_alpha]
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.p_value).collect()
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} grid is empty")));
    }
    if axis.iter().any(|x| !x.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "{name} grid must be finite and strictly increasing"
        )));
    }
    Ok(())
}

/// One infimum per grid point. Failures are recorded per point and the scan
/// carries on; only malformed grids are rejected up front.
pub fn scan_surface(
    chi: &[f64],
    beta: &[f64],
    alpha_over_pi: &[f64],
    schedule: &TruncationSchedule,
) -> Result<ScanSurface> {
    check_axis("chi", chi)?;
    check_axis("beta", beta)?;
    check_axis("alpha/pi", alpha_over_pi)?;
    // Reject parameters outside the domain before any work.
    for &c in chi {
        for &b in beta {
            RingParams::from_alpha_over_pi(c, b, alpha_over_pi[0])?;
        }
    }
    for &a in alpha_over_pi {
        RingParams::from_alpha_over_pi(chi[0], beta[0], a)?;
    }
    let started_unix = unix_now();
    let config_hash = config_hash(&(chi, beta, alpha_over_pi, schedule));
    let mut jobs = Vec::with_capacity(chi.len() * beta.len() * alpha_over_pi.len());
    for &c in chi {
        for &b in beta {
            for &a in alpha_over_pi {
                jobs.push((c, b, a));
            }
        }
    }
    let points = par::map_slice(&jobs, |&(c, b, a)| {
        let r = RingParams::from_alpha_over_pi(c, b, a).and_then(|p| backflow_infimum(&p, schedule));
        match r {
            Ok(r) => ScanPoint {
                chi: c,
                beta: b,
                alpha_over_pi: a,
                p_value: Some(r.p_value),
                ssr: Some(r.extrapolation.ssr),
                error: None,
            },
            Err(e) => ScanPoint {
                chi: c,
                beta: b,
                alpha_over_pi: a,
                p_value: None,
                ssr: None,
                error: Some(e.to_string()),
            },
        }
    });
    Ok(ScanSurface {
        chi: chi.to_vec(),
        beta: beta.to_vec(),
        alpha_over_pi: alpha_over_pi.to_vec(),
        points,
        provenance: Provenance {
            config_hash,
            started_unix,
            finished_unix: unix_now(),
        },
    })
}

/// A single `alpha` curve at fixed `chi`, `beta`.
pub fn scan_alpha(
    chi: f64,
    beta: f64,
    alpha_over_pi: &[f64],
    schedule: &TruncationSchedule,
) -> Result<ScanSurface> {
    scan_surface(&[chi], &[beta], alpha_over_pi, schedule)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiPoint {
    pub chi: f64,
    pub alpha_over_pi: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPoint {
    pub beta: f64,
    pub alpha_over_pi: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMinimum {
    pub chi: f64,
    pub alpha_over_pi: f64,
    pub beta: f64,
    pub p_value: f64,
    /// `min_alpha P` along the coarse and refined `chi` grids, sorted by `chi`.
    pub curve: Vec<ChiPoint>,
    /// `min_alpha P` at the optimal `chi` for each checked `beta`.
    pub beta_check: Vec<BetaPoint>,
    pub result: ExtremalResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalSearch {
    pub alpha: AlphaSearch,
    /// Step of the refined `chi` grid around the coarse minimum.
    pub fine_step: f64,
    /// Golden-section tolerance in `chi` after the fine grid.
    pub chi_tol: f64,
    /// Half-width in `alpha/pi` of the local window used once a nearby
    /// optimum is known.
    pub alpha_window: f64,
    /// Coarse `beta` grid `0, -beta_step, ...` above -1.
    pub beta_step: f64,
}

impl Default for GlobalSearch {
    fn default() -> Self {
        Self {
            alpha: AlphaSearch::default(),
            fine_step: 0.005,
            chi_tol: 1e-3,
            alpha_window: 0.02,
            beta_step: 0.1,
        }
    }
}

/// The beta grid `0, -step, -2 step, ...` inside `(-1, 0]`.
pub fn beta_grid(step: f64) -> Vec<f64> {
    let n = ((1.0 - 1e-9) / step).floor() as usize;
    (0..=n).map(|k| 0.0 - k as f64 * step).filter(|b| *b > -1.0).collect()
}

/// Minimizes over `alpha` at every `chi` of the grid (`beta = 0`), refines
/// around the best `chi`, then checks a coarse `beta` grid at the optimum.
pub fn global_minimum(
    chi_grid: &[f64],
    schedule: &TruncationSchedule,
    opts: &GlobalSearch,
) -> Result<GlobalMinimum> {
    check_axis("chi", chi_grid)?;
    if chi_grid.len() < 3 {
        return Err(Error::InvalidArgument("chi grid needs at least 3 points".into()));
    }
    for &c in chi_grid {
        RingParams::from_alpha_over_pi(c, 0.0, 0.1)?;
    }
    let coarse = par::map_slice(chi_grid, |&c| minimize_alpha(c, 0.0, schedule, &opts.alpha))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut curve: Vec<ChiPoint> = coarse
        .iter()
        .zip(chi_grid)
        .map(|(o, &c)| ChiPoint {
            chi: c,
            alpha_over_pi: o.alpha_over_pi,
            p_value: o.result.p_value,
        })
        .collect();
    let values: Vec<f64> = curve.iter().map(|p| p.p_value).collect();
    let i = search::argmin(&values).expect("non-empty");
    let (lo, hi) = search::bracket(chi_grid, i);
    let anchor = curve[i].alpha_over_pi;

    let local = |c: f64, centre: f64| {
        let s = AlphaSearch::scale(c);
        let w = opts.alpha_window * s;
        minimize_alpha_in(c, 0.0, (centre - w).max(opts.alpha.tol * s), centre + w, schedule, opts.alpha.tol * s)
    };

    // Fine grid inside the coarse bracket.
    let n_fine = ((hi - lo) / opts.fine_step).round() as usize;
    let fine: Vec<f64> = (1..n_fine)
        .map(|k| lo + opts.fine_step * k as f64)
        .filter(|c| !chi_grid.iter().any(|g| (g - c).abs() < 1e-12))
        .collect();
    let fine_opt = par::map_slice(&fine, |&c| local(c, anchor))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    curve.extend(fine.iter().zip(&fine_opt).map(|(&c, o)| ChiPoint {
        chi: c,
        alpha_over_pi: o.alpha_over_pi,
        p_value: o.result.p_value,
    }));
    curve.sort_by(|a, b| a.chi.total_cmp(&b.chi));

    let chis: Vec<f64> = curve.iter().map(|p| p.chi).collect();
    let values: Vec<f64> = curve.iter().map(|p| p.p_value).collect();
    let j = search::argmin(&values).expect("non-empty");
    let (lo, hi) = search::bracket(&chis, j);
    let anchor = curve[j].alpha_over_pi;
    let m = golden_section(|c| local(c, anchor).map(|o| o.result.p_value), lo, hi, opts.chi_tol)?;
    let (chi_star, best) = if m.value < curve[j].p_value {
        (m.x, local(m.x, anchor)?)
    } else {
        (curve[j].chi, local(curve[j].chi, anchor)?)
    };

    let betas = beta_grid(opts.beta_step);
    let beta_opt = par::map_slice(&betas, |&b| {
        if b == 0.0 {
            Ok(best.clone())
        } else {
            minimize_alpha(chi_star, b, schedule, &opts.alpha)
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let beta_check: Vec<BetaPoint> = betas
        .iter()
        .zip(&beta_opt)
        .map(|(&b, o)| BetaPoint {
            beta: b,
            alpha_over_pi: o.alpha_over_pi,
            p_value: o.result.p_value,
        })
        .collect();
    let k = search::argmin(&beta_check.iter().map(|p| p.p_value).collect::<Vec<_>>()).expect("non-empty");
    let winner = &beta_opt[k];
    Ok(GlobalMinimum {
        chi: chi_star,
        alpha_over_pi: winner.alpha_over_pi,
        beta: beta_check[k].beta,
        p_value: winner.result.p_value,
        curve,
        beta_check,
        result: winner.result.clone(),
    })
}

/// Large-`chi` values of the table.
pub const MASSLESS_CHI: [f64; 5] = [20.0, 500.0, 1000.0, 10000.0, 100000.0];

/// `min_alpha P` at `beta = 0` for each `chi`.
pub fn massless_estimates(
    chi_values: &[f64],
    schedule: &TruncationSchedule,
    opts: &AlphaSearch,
) -> Result<Vec<ChiPoint>> {
    if chi_values.is_empty() {
        return Err(Error::InvalidArgument("no chi values given".into()));
    }
    for &c in chi_values {
        RingParams::from_alpha_over_pi(c, 0.0, 0.1)?;
    }
    par::map_slice(chi_values, |&c| {
        minimize_alpha(c, 0.0, schedule, opts).map(|o| ChiPoint {
            chi: c,
            alpha_over_pi: o.alpha_over_pi,
            p_value: o.result.p_value,
        })
    })
    .into_iter()
    .collect()
}
