use thiserror::Error;

use crate::odeint::Trajectory;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Domain { field: &'static str, reason: String },

    #[error("field is not smooth at theta = {theta} (alpha == beta cusp)")]
    Nonsmooth { theta: f64 },

    #[error("equilibrium at theta = {theta} is not a center")]
    NotCenter { theta: f64 },

    #[error("equilibrium at theta = {theta} is degenerate")]
    Degenerate { theta: f64 },

    #[error("parameters incompatible with reduction: {0}")]
    IncompatibleRegion(String),

    #[error("energy {energy} sits on a barrier; period is infinite")]
    InfinitePeriod { energy: f64 },

    #[error("no orbit exists at energy {energy}: {reason}")]
    NoOrbit { energy: f64, reason: String },

    #[error("root finding failed: {0}")]
    RootNotFound(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64, partial: Box<Trajectory> },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("separatrix continuation failed: {0}")]
    Continuation(String),

    #[error("integrand does not decay: {0}")]
    NonDecaying(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        field,
        reason: reason.into(),
    }
}
