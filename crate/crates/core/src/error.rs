//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes of two objects that must agree do not.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// A configuration value violates its constraints.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A simulated series exceeded the per-series event cap.
    #[error("explosive process: series {series} exceeded {cap} events before t = {t}")]
    ExplosiveProcess { series: usize, cap: usize, t: f64 },

    /// A thinning upper bound was violated; indicates a bases/bound bug.
    #[error("thinning bound violated at t = {t}: intensity {intensity} > bound {bound}")]
    BoundViolation { t: f64, intensity: f64, bound: f64 },

    /// A computation produced a non-finite value.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// An operation that needs observed events got none.
    #[error("no events: {0}")]
    NoEvents(String),

    /// A basis kind is not supported by the requested operation.
    #[error("unsupported basis for this operation: {0}")]
    UnsupportedBasis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
