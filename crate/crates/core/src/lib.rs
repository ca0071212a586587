//! Numerical toolkit for the 1D Schrodinger operator `-d^2/dx^2 + V` and the
//! cubic nonlinear Schrodinger equation driven by it.
//!
//! The crate builds the full scattering apparatus of the operator — Jost
//! solutions, transmission/reflection coefficients, the distorted Fourier
//! transform — and uses it to evolve the cubic NLS at desk scale, measuring
//! dispersive decay and the logarithmic phase corrections of modified
//! scattering.
//!
//! Pipeline: [`potential`] -> [`jost`] -> [`scattering`] -> [`distorted`] ->
//! [`dynamics`] -> [`asymptotics`]. The [`verify`] module packages the
//! acceptance checks run by both the test suite and the CLI.

pub mod asymptotics;
pub mod distorted;
pub mod dynamics;
pub mod formats;
pub mod grid;
pub mod jost;
pub mod mat2;
pub mod potential;
pub mod scattering;
pub mod verify;

pub use num_complex::Complex64;

/// Errors surfaced by toolkit operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-uniform custom grid (max deviation {max_dev:.3e})")]
    NonUniformGrid { max_dev: f64 },
    #[error("NaN or non-finite sample encountered in {0}")]
    NonFinite(&'static str),
    #[error("iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("blow-up guard tripped at t = {t}: |u| reached {sup} (limit {limit})")]
    BlowUp { t: f64, sup: f64, limit: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
