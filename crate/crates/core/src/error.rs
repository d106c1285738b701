use alloc::string::String;

/// Failure modes shared by every simulation stage.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a formula.
    #[error("{name} = {value:e} is outside the valid domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    /// The transverse grid is too coarse for the oscillatory kernel.
    #[error(
        "grid step {dx:e} m undersamples the propagation kernel over {delta_z:e} m; \
         required dx <= {required_dx:e} m"
    )]
    Undersampled {
        dx: f64,
        required_dx: f64,
        delta_z: f64,
    },
    /// Inputs are individually valid but incompatible with each other.
    #[error("contract violation: {0}")]
    Contract(String),
    /// The beamline geometry lets no flux through.
    #[error("beamline misconfigured: {0}")]
    Misconfigured(String),
    /// A statistic has no defined value for the given data.
    #[error("undefined: {0}")]
    Undefined(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "finite and > 0",
        })
    }
}
