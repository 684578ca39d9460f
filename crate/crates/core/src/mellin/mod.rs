//! Mellin symbols of limit operators, invertibility scans along weight lines
//! and admissible weight windows.
//!
//! Convention: `K̂(λ) = ∫₀^∞ κ(t) t^{-iλ} dt/t`, so that `t ↦ t^{iλ}` is an
//! eigenfunction of the convolution with eigenvalue `K̂(λ)`.

mod kernel;
mod symbol;
mod window;

pub use kernel::{mellin_transform, ray_kernel, wedge_np_kernel, DensityFn, MellinKernel, MellinOperator};
pub use symbol::{
    invertibility_scan, smallest_singular_value, symbol_on_line, tail_bound, LineCalibration, LineCandidate,
    MellinSymbol, ScanOptions, ScanResult, SymbolSample, WeightLine,
};
pub use window::{
    admissible_weight_window, usable_range, MarginSample, SymbolZero, VertexWindow, VertexWindowEntry,
    WindowOptions, WindowReport,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MellinError {
    #[error("line Im λ = {eta} lies outside the strip ({lower}, {upper})")]
    OutsideStrip { eta: f64, lower: f64, upper: f64 },
    #[error("Mellin integral does not converge on Im λ = {eta}")]
    NonConvergent { eta: f64 },
    #[error("quadrature failed at λ = {lambda:?} (error estimate {error:e})")]
    Quadrature { lambda: (f64, f64), error: f64 },
    #[error("tail bound fails up to ξ_max = {xi_max}")]
    TailBound { xi_max: f64 },
    #[error("no invertible weight in the search interval")]
    NoInvertibleWeight,
    #[error("angle {0} is outside (0, 2π)")]
    AngleOutOfRange(f64),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}
