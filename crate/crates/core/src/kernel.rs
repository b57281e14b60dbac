//! The flux kernel `K_{l,l'}`: the quadratic form `cᵀ K c` is the probability
//! that flows through `phi = 0` during the window for the state with real
//! coefficients `c_l`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::model::{ModeTable, RingParams};

/// Below this `|x|` the sinc is evaluated from its Taylor series.
const SINC_TAYLOR: f64 = 1e-4;

/// Unnormalized `sin(x) / x`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SINC_TAYLOR {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Sinc argument `2 alpha (eps_i - eps_j) / chi²`, written through
/// `eps_i - eps_j = chi² (q_i - q_j) / (eps_i + eps_j)` so nothing cancels.
#[inline]
pub fn sinc_argument(alpha: f64, q_i: f64, q_j: f64, eps_i: f64, eps_j: f64) -> f64 {
    2.0 * alpha * (q_i - q_j) / (eps_i + eps_j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelOrigin {
    Relativistic { chi: f64, beta: f64, alpha: f64 },
    /// The `chi -> 0` limit.
    Nonrelativistic { beta: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxKernel {
    origin: KernelOrigin,
    /// Angular index of row/column 0.
    start: i64,
    matrix: SymMatrix,
}

impl FluxKernel {
    pub fn origin(&self) -> KernelOrigin {
        self.origin
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// Truncation index: the kernel is `(n_max + 1) x (n_max + 1)`.
    pub fn n_max(&self) -> usize {
        self.matrix.dim() - 1
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.matrix
    }

    /// Entry for rows/columns `(i, j)` (offsets from `start`).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Integrated flux `cᵀ K c` of a state with real coefficients.
    pub fn probability(&self, coeffs: &[f64]) -> f64 {
        self.matrix.quadratic_form(coeffs)
    }

    /// Writes the debug dump: magic `QBFK`, `u32` version, `u64 N`, then
    /// `chi, beta, alpha` as `f64` (chi = 0 for the nonrelativistic kernel),
    /// `i64 start` and the row-major entries, all little-endian. Not a stable
    /// interchange format.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (chi, beta, alpha) = match self.origin {
            KernelOrigin::Relativistic { chi, beta, alpha } => (chi, beta, alpha),
            KernelOrigin::Nonrelativistic { beta, alpha } => (0.0, beta, alpha),
        };
        w.write_all(b"QBFK")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.n_max() as u64).to_le_bytes())?;
        for x in [chi, beta, alpha] {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&self.start.to_le_bytes())?;
        for x in self.matrix.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"QBFK" {
            return Err(bad("not a kernel dump"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(bad("unsupported kernel dump version"));
        }
        r.read_exact(&mut b8)?;
        let n_max = u64::from_le_bytes(b8) as usize;
        let mut f = || -> io::Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let (chi, beta, alpha) = (f()?, f()?, f()?);
        r.read_exact(&mut b8)?;
        let start = i64::from_le_bytes(b8);
        let n = n_max + 1;
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut b8)?;
            data.push(f64::from_le_bytes(b8));
        }
        let origin = if chi == 0.0 {
            KernelOrigin::Nonrelativistic { beta, alpha }
        } else {
            KernelOrigin::Relativistic { chi, beta, alpha }
        };
        let matrix = SymMatrix::from_row_major(n, data).map_err(|e| bad(&e.to_string()))?;
        Ok(Self {
            origin,
            start,
            matrix,
        })
    }
}

fn check_truncation(n_max: usize) -> Result<()> {
    if n_max < 1 {
        return Err(Error::InvalidArgument(format!(
            "kernel truncation n_max must be at least 1, got {n_max}"
        )));
    }
    Ok(())
}

/// Relativistic kernel on modes `ceil(beta) ..= ceil(beta) + n_max`.
pub fn build_kernel(params: &RingParams, n_max: usize) -> Result<FluxKernel> {
    check_truncation(n_max)?;
    Ok(kernel_from_table(&ModeTable::new(*params, n_max)))
}

/// Relativistic kernel over the modes of an existing table.
pub fn kernel_from_table(table: &ModeTable) -> FluxKernel {
    let p = table.params();
    let four_alpha = 4.0 * p.alpha();
    let alpha = p.alpha();
    let matrix = SymMatrix::from_upper_fn(table.len(), |i, j| {
        if i == j {
            return table.flux(i);
        }
        let arg = sinc_argument(alpha, table.angular[i], table.angular[j], table.eps[i], table.eps[j]);
        four_alpha
            * (table.norm[i] * table.norm[j])
            * (table.drift[i] + table.drift[j])
            * sinc(arg)
    });
    FluxKernel {
        origin: KernelOrigin::Relativistic {
            chi: p.chi(),
            beta: p.beta(),
            alpha,
        },
        start: table.start(),
        matrix,
    }
}

/// The `chi -> 0` kernel
/// `(alpha/pi)(l + l' - 2 beta) sinc(alpha [(l-β)(l-β+1) - (l'-β)(l'-β+1)])`
/// on modes `0 ..= n_max`.
pub fn nonrel_kernel(alpha: f64, beta: f64, n_max: usize) -> Result<FluxKernel> {
    check_truncation(n_max)?;
    // Validate through the ring parameters (chi is irrelevant here).
    let p = RingParams::new(1.0, beta, alpha)?;
    let start = p.first_mode();
    let scale = alpha / std::f64::consts::PI;
    let shifted: Vec<f64> = (0..=n_max).map(|k| (start + k as i64) as f64 - beta).collect();
    let q: Vec<f64> = shifted.iter().map(|m| m * (m + 1.0)).collect();
    let matrix = SymMatrix::from_upper_fn(n_max + 1, |i, j| {
        scale * (shifted[i] + shifted[j]) * sinc(alpha * (q[i] - q[j]))
    });
    Ok(FluxKernel {
        origin: KernelOrigin::Nonrelativistic { beta, alpha },
        start,
        matrix,
    })
}
