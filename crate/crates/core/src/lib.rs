//! Quantum backflow of a Dirac fermion confined to a ring.
//!
//! The probability that flows backwards through a point of the ring during a
//! time window is a quadratic form `cᵀ K c` in the expansion coefficients of
//! a positive-energy, non-negative angular momentum state. Its infimum is
//! the smallest eigenvalue of the flux kernel `K`, obtained here on a
//! sequence of truncations and extrapolated in `1/N`.

pub mod current;
pub mod eig;
pub mod error;
pub mod extrapolate;
pub mod extremal;
pub mod kernel;
pub mod line;
pub mod matrix;
pub mod model;
pub mod par;
pub mod quadrature;
pub mod search;
pub mod two_mode;

pub use error::{Error, Result};
pub use model::RingParams;
