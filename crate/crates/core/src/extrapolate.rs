//! Truncation extrapolation: `lambda_min^(N)` is fitted by a quadratic in
//! `x = 1/N` and the fit is read off at `x = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 4;
pub const MIN_TRUNCATION: usize = 50;
/// Fits with a larger sum of squared residuals are flagged.
pub const SSR_WARN: f64 = 1e-8;

/// Least-squares `y ≈ c0 + c1 x + c2 x²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub coeffs: [f64; 3],
    pub ssr: f64,
}

impl QuadraticFit {
    pub fn eval(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.coeffs;
        c0 + x * (c1 + x * c2)
    }
}

/// Householder QR on the column-scaled basis `[1, x/s, (x/s)²]`, `s = max|x|`.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<QuadraticFit> {
    let m = points.len();
    if m < 3 {
        return Err(Error::TooFewSamples { got: m, need: 3 });
    }
    let s = points.iter().fold(0.0f64, |acc, p| acc.max(p.0.abs()));
    let s = if s > 0.0 { s } else { 1.0 };
    let mut cols: [Vec<f64>; 3] = [
        vec![1.0; m],
        points.iter().map(|p| p.0 / s).collect(),
        points.iter().map(|p| (p.0 / s) * (p.0 / s)).collect(),
    ];
    let mut y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mut r = [[0.0f64; 3]; 3];
    for k in 0..3 {
        let norm = cols[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(
                "degenerate abscissae in quadratic fit".into(),
            ));
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        let reflect = |target: &mut [f64]| {
            let proj: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vv;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= proj * vi;
            }
        };
        for col in cols.iter_mut().skip(k) {
            reflect(&mut col[k..]);
        }
        reflect(&mut y[k..]);
        for (j, col) in cols.iter().enumerate().skip(k) {
            r[k][j] = col[k];
        }
    }
    let mut c = [0.0f64; 3];
    for k in (0..3).rev() {
        let mut acc = y[k];
        for j in (k + 1)..3 {
            acc -= r[k][j] * c[j];
        }
        c[k] = acc / r[k][k];
    }
    let coeffs = [c[0], c[1] / s, c[2] / (s * s)];
    let ssr = y[3..].iter().map(|t| t * t).sum();
    Ok(QuadraticFit { coeffs, ssr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationResult {
    /// Estimate of `lim_{N -> inf} lambda_min^(N)`; equals `coeffs[0]`.
    pub value_at_zero: f64,
    /// Quadratic in `x = 1/N`.
    pub coeffs: [f64; 3],
    pub ssr: f64,
    /// `(N, lambda_min^(N))`, sorted by `N`.
    pub points: Vec<(usize, f64)>,
    /// Set when `ssr > SSR_WARN`.
    pub poor_fit: bool,
}

pub fn quad_extrapolate(samples: &[(usize, f64)]) -> Result<ExtrapolationResult> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    let mut points = samples.to_vec();
    points.sort_by_key(|p| p.0);
    for w in points.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateTruncation(w[0].0));
        }
    }
    if let Some(&(n, _)) = points.iter().find(|p| p.0 < MIN_TRUNCATION) {
        return Err(Error::TruncationTooSmall {
            n,
            min: MIN_TRUNCATION,
        });
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (1.0 / n as f64, v)).collect();
    let fit = fit_quadratic(&xy)?;
    let poor_fit = fit.ssr > SSR_WARN;
    if poor_fit {
        log::warn!("quadratic 1/N fit has SSR {:e} > {:e}", fit.ssr, SSR_WARN);
    }
    Ok(ExtrapolationResult {
        value_at_zero: fit.coeffs[0],
        coeffs: fit.coeffs,
        ssr: fit.ssr,
        points,
        poor_fit,
    })
}

/// Increasing sequence of truncation sizes feeding one extrapolation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSchedule(Vec<usize>);

impl TruncationSchedule {
    pub fn new(mut sizes: Vec<usize>) -> Result<Self> {
        sizes.sort_unstable();
        if sizes.len() < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                got: sizes.len(),
                need: MIN_SAMPLES,
            });
        }
        for w in sizes.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateTruncation(w[0]));
            }
        }
        if sizes[0] < MIN_TRUNCATION {
            return Err(Error::TruncationTooSmall {
                n: sizes[0],
                min: MIN_TRUNCATION,
            });
        }
        Ok(Self(sizes))
    }

    pub fn accurate() -> Self {
        Self(vec![500, 700, 1000, 1400, 2000])
    }

    pub fn fast() -> Self {
        Self(vec![200, 300, 450, 700, 1000])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn largest(&self) -> usize {
        *self.0.last().expect("non-empty")
    }

    /// The next size after the largest one, about `sqrt(2)` times larger.
    pub fn next_size(&self) -> usize {
        let last = self.largest() as f64;
        (last * std::f64::consts::SQRT_2 / 50.0).round() as usize * 50
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Fast,
    Accurate,
}

impl Profile {
    pub fn schedule(self) -> TruncationSchedule {
        match self {
            Profile::Fast => TruncationSchedule::fast(),
            Profile::Accurate => TruncationSchedule::accurate(),
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Profile::Fast),
            "accurate" => Ok(Profile::Accurate),
            other => Err(Error::InvalidArgument(format!(
                "unknown profile {other:?} (expected fast or accurate)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_quadratic(c: [f64; 3], ns: &[usize]) -> Vec<(usize, f64)> {
        ns.iter()
            .map(|&n| {
                let x = 1.0 / n as f64;
                (n, c[0] + c[1] * x + c[2] * x * x)
            })
            .collect()
    }

    #[test]
    fn exact_quadratic_is_recovered() {
        let c = [-0.091999, 0.31, -2.7];
        let r = quad_extrapolate(&on_quadratic(c, &[500, 700, 1000, 1400, 2000])).unwrap();
        assert!((r.value_at_zero - c[0]).abs() < 1e-14);
        assert!((r.coeffs[1] - c[1]).abs() < 1e-10);
        assert!((r.coeffs[2] - c[2]).abs() < 1e-7);
        assert!(r.ssr < 1e-28);
        assert!(!r.poor_fit);
        assert_eq!(r.value_at_zero, r.coeffs[0]);
    }

    #[test]
    fn constant_samples() {
        let s: Vec<_> = [100, 200, 300, 400].iter().map(|&n| (n, 0.25)).collect();
        let r = quad_extrapolate(&s).unwrap();
        assert!((r.value_at_zero - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_samples() {
        let s = [(100, 1.0), (200, 1.0), (300, 1.0)];
        assert!(matches!(quad_extrapolate(&s), Err(Error::TooFewSamples { .. })));
        let s = [(100, 1.0), (200, 1.0), (300, 1.0), (300, 1.0)];
        assert!(matches!(quad_extrapolate(&s), Err(Error::DuplicateTruncation(300))));
        let s = [(40, 1.0), (200, 1.0), (300, 1.0), (400, 1.0)];
        assert!(matches!(quad_extrapolate(&s), Err(Error::TruncationTooSmall { .. })));
    }

    #[test]
    fn flags_poor_fit() {
        let s = [(100, 0.0), (200, 1e-3), (300, -1e-3), (400, 1e-3), (500, -1e-3)];
        let r = quad_extrapolate(&s).unwrap();
        assert!(r.poor_fit);
        assert!(r.ssr > SSR_WARN);
    }

    #[test]
    fn schedules() {
        assert_eq!(TruncationSchedule::accurate().sizes(), &[500, 700, 1000, 1400, 2000]);
        assert_eq!(TruncationSchedule::fast().sizes(), &[200, 300, 450, 700, 1000]);
        assert_eq!(TruncationSchedule::accurate().next_size(), 2850);
        assert!(TruncationSchedule::new(vec![100, 100, 200, 300]).is_err());
        assert_eq!(TruncationSchedule::new(vec![400, 100, 200, 300]).unwrap().sizes(), &[100, 200, 300, 400]);
        assert_eq!("fast".parse::<Profile>().unwrap(), Profile::Fast);
        assert!("slow".parse::<Profile>().is_err());
    }
}
