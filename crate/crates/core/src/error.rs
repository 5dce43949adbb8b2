use thiserror::Error;

use crate::ode::OdeError;

/// Errors produced by the simulation and synthesis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The adaptive integrator could not reach the requested tolerance.
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),

    /// The Bloch-angle equations hit a coordinate singularity.
    #[error("trajectory singular at t = {t:.6e} s (zeta = {zeta:.9})")]
    Singular { t: f64, zeta: f64 },

    /// A loop that should close on the Bloch sphere did not.
    #[error("trajectory not cyclic: dzeta = {dzeta:.3e}, dxi = {dxi:.3e}")]
    NotCyclic { dzeta: f64, dxi: f64 },

    /// A cotangent pole of the constraint relation was hit.
    #[error("constraint pole at t = {t:.6e} s")]
    Pole { t: f64 },

    /// A statistic is undefined for the given data (e.g. zero variance).
    #[error("undefined: {0}")]
    Undefined(String),

    /// The optimizer was given nothing to do.
    #[error("empty search budget")]
    EmptyBudget,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
