use thiserror::Error;

/// Errors raised by chart evaluation, integration and cone diagnostics.
///
/// Scalar payloads are reported as `f64` regardless of the working precision.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("chart point outside chart radius: |x_{index}| = {value} >= {radius}")]
    OutsideChart { index: usize, value: f64, radius: f64 },

    #[error("metric is not positive definite at the queried point (pivot {pivot})")]
    DegenerateMetric { pivot: f64 },

    #[error("tangent vectors span a degenerate plane (gram determinant {gram})")]
    DegeneratePlane { gram: f64 },

    #[error("vector is not unit for the chart metric: g(v,v) = {norm_sq}")]
    NotUnit { norm_sq: f64 },

    #[error("jacobi state is not normalized: |xi|^2 + |eta|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("zero jacobi state has no cone alignment")]
    ZeroState,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("finite-difference step underflow: h = {h}")]
    StepUnderflow { h: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("deformation too large: metric loses positive definiteness inside the tube")]
    DeformationTooLarge,

    #[error("degenerate fit window: {0}")]
    FitWindow(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<V> = std::result::Result<V, Error>;

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
