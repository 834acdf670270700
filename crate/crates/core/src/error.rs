use thiserror::Error;

/// Errors raised by the scattering, chain, force and estimator routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the physical domain of the model.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scattering matrix could not be rearranged into transfer form.
    #[error("non-invertible transmission block (|det| = {det:.3e})")]
    NonInvertible { det: f64 },

    /// The boundary-value system of a chain is numerically singular.
    #[error("singular chain system (condition number {condition:.3e})")]
    Singular { condition: f64 },

    /// The boundary conditions were not reproduced after the forward sweep.
    #[error("boundary residual {residual:.3e} exceeds tolerance")]
    Residual { residual: f64 },

    /// The multiple-reflection series did not converge.
    #[error(
        "reflection series not converged after {bounces} bounces (last increment {increment:.3e})"
    )]
    Divergence { bounces: usize, increment: f64 },

    /// The coupling quadrature is not resolved.
    #[error("quadrature not converged: doubling resolution changes a coefficient by {change:.3e}")]
    Resolution { change: f64 },

    /// The estimated coupling loses too much power for a two-mode description.
    #[error("two-mode model invalid: loss fraction {loss:.4} exceeds 0.5")]
    ModelInvalid { loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
