use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field evaluated on a current-carrying wire")]
    SingularEvaluation,

    #[error("voxel grid needs {requested} cells, above the limit of {limit}; use a coarser voxel edge")]
    Capacity { requested: u64, limit: u64 },

    #[error("outside the perturbative regime: {0}")]
    OutOfRegime(String),

    #[error("signal derivative with respect to the field vanishes")]
    UndefinedDerivative,

    #[error("no measurable signal: {0}")]
    NoSignal(String),

    #[error("root not bracketed: SNR-1 is {at_low:.3e} at rho={low:.3e} and {at_high:.3e} at rho={high:.3e} (m^-3)")]
    Bracket { low: f64, high: f64, at_low: f64, at_high: f64 },

    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),

    #[error("unknown sweep plan `{0}`")]
    UnknownPlan(String),

    #[error("no dephasing time configured for n = {0}")]
    MissingCoherence(u32),

    #[error("steady state is not unique (smallest singular values {0:.3e}, {1:.3e})")]
    NonUniqueSteadyState(f64, f64),

    #[error("quadrature did not converge: last two estimates {0:.17e} and {1:.17e}")]
    Accuracy(f64, f64),
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: reason() })
    }
}
