use thiserror::Error;

/// Errors raised by the inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The restricted standard error is zero where a ratio of standard errors is required.
    #[error("degenerate variance for table ({x_t}, {x_c}) at delta = {delta}")]
    DegenerateVariance { x_t: u32, x_c: u32, delta: f64 },

    /// A power curve was requested on a grid with no admissible point.
    #[error("no admissible point on the delta grid for p_t = {0}")]
    EmptyGrid(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
